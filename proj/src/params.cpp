#include "safrlm/params.hpp"

#include <cmath>
#include <unordered_set>

#include "safrlm/error.hpp"
#include "safrlm/rng.hpp"

namespace safrlm {

template <typename T>
ParamId ParamStore<T>::add(std::string name, std::string group, Mat<T> value) {
  if (find(name)) throw Error(ErrorCode::configuration, "duplicate parameter name: " + name);
  entries_.push_back(Entry{std::move(name), std::move(group), std::move(value)});
  return ParamId{entries_.size() - 1};
}

template <typename T>
std::size_t ParamStore<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += static_cast<std::size_t>(e.value.size());
  return n;
}

template <typename T>
std::optional<ParamId> ParamStore<T>::find(const std::string& name) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].name == name) return ParamId{i};
  }
  return std::nullopt;
}

template <typename T>
std::vector<std::string> ParamStore<T>::groups() const {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const auto& e : entries_) {
    if (seen.insert(e.group).second) out.push_back(e.group);
  }
  return out;
}

template <typename T>
nlohmann::ordered_json ParamStore<T>::to_json() const {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& e : entries_) {
    std::vector<T> data(e.value.data(), e.value.data() + e.value.size());
    j[e.name] = {{"group", e.group}, {"rows", e.value.rows()}, {"cols", e.value.cols()}, {"data", data}};
  }
  return j;
}

template <typename T>
void ParamStore<T>::load_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::validation, "parameter block must be a JSON object");
  if (j.size() != entries_.size()) {
    throw Error(ErrorCode::validation, "checkpoint has " + std::to_string(j.size()) +
                                           " parameters, model expects " + std::to_string(entries_.size()));
  }
  for (auto& e : entries_) {
    auto it = j.find(e.name);
    if (it == j.end()) throw Error(ErrorCode::validation, "checkpoint is missing parameter " + e.name);
    const auto rows = it->at("rows").template get<Eigen::Index>();
    const auto cols = it->at("cols").template get<Eigen::Index>();
    if (rows != e.value.rows() || cols != e.value.cols()) {
      throw Error(ErrorCode::dimension, "shape mismatch for parameter " + e.name);
    }
    const auto data = it->at("data").template get<std::vector<T>>();
    if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
      throw Error(ErrorCode::dimension, "data length mismatch for parameter " + e.name);
    }
    std::copy(data.begin(), data.end(), e.value.data());
  }
}

template <typename T>
Mat<T> uniform_fan_in(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in, Rng& rng) {
  const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  Mat<T> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(rng.uniform(-bound, bound));
  return m;
}

template class ParamStore<float>;
template class ParamStore<double>;
template Mat<float> uniform_fan_in<float>(Eigen::Index, Eigen::Index, Eigen::Index, Rng&);
template Mat<double> uniform_fan_in<double>(Eigen::Index, Eigen::Index, Eigen::Index, Rng&);

}  // namespace safrlm
