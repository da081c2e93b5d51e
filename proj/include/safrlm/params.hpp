#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "safrlm/autograd.hpp"

namespace safrlm {

class Rng;

struct ParamId {
  std::size_t index = 0;
};

/// Named, grouped collection of learnable matrices. Groups are the unit of
/// gradient-check reporting (one entry per layer or block).
template <typename T>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    std::string group;
    Mat<T> value;
  };

  ParamId add(std::string name, std::string group, Mat<T> value);

  Mat<T>& value(ParamId id) { return entries_[id.index].value; }
  const Mat<T>& value(ParamId id) const { return entries_[id.index].value; }
  const Entry& entry(ParamId id) const { return entries_[id.index]; }
  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<Entry>& entries() { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;

  std::optional<ParamId> find(const std::string& name) const;

  /// Distinct group names in registration order.
  std::vector<std::string> groups() const;

  template <typename U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (const auto& e : entries_) out.add(e.name, e.group, e.value.template cast<U>());
    return out;
  }

  /// {"name": {"group": g, "rows": r, "cols": c, "data": [...]}, ...}
  nlohmann::ordered_json to_json() const;

  /// Overwrites values of an already-built store; names and shapes must match.
  void load_json(const nlohmann::json& j);

 private:
  std::vector<Entry> entries_;
};

/// Uniform in +-sqrt(1 / fan_in).
template <typename T>
Mat<T> uniform_fan_in(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in, Rng& rng);

/// Binds parameters of one store into one tape on first use.
template <typename T>
class ParamBinder {
 public:
  ParamBinder(ag::Tape<T>& tape, const ParamStore<T>& store, bool trainable)
      : tape_(tape), store_(store), trainable_(trainable), vars_(store.size()) {}

  ag::Var operator()(ParamId id) {
    ag::Var& v = vars_[id.index];
    if (!v.valid()) {
      v = trainable_ ? tape_.variable(store_.value(id)) : tape_.constant(store_.value(id));
    }
    return v;
  }

  /// Gradient for a parameter after tape.backward(); zeros if never bound.
  Mat<T> gradient(ParamId id) const {
    const ag::Var v = vars_[id.index];
    if (!v.valid()) return Mat<T>::Zero(store_.value(id).rows(), store_.value(id).cols());
    return tape_.grad(v);
  }

 private:
  ag::Tape<T>& tape_;
  const ParamStore<T>& store_;
  bool trainable_;
  std::vector<ag::Var> vars_;
};

}  // namespace safrlm
