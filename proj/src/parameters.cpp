#include "idsgp/parameters.hpp"

#include <stdexcept>

namespace idsgp {

void ParameterSet::set(const std::string& name, Tensor value) {
  entries_.insert_or_assign(name, std::move(value));
}

const Tensor& ParameterSet::at(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw std::out_of_range("no parameter named '" + name + "'");
  return it->second;
}

Tensor& ParameterSet::at(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw std::out_of_range("no parameter named '" + name + "'");
  return it->second;
}

std::size_t ParameterSet::total_size() const {
  std::size_t n = 0;
  for (const auto& [name, t] : entries_) n += t.numel();
  return n;
}

std::map<std::string, ad::Var> ParameterSet::bind(ad::Tape& tape,
                                                  const std::set<std::string>& frozen) const {
  std::map<std::string, ad::Var> out;
  for (const auto& [name, t] : entries_) {
    out.emplace(name, frozen.count(name) ? tape.constant(t) : tape.parameter(name, t));
  }
  return out;
}

}  // namespace idsgp
