#pragma once

#include <map>
#include <set>
#include <string>

#include "idsgp/autodiff.hpp"

namespace idsgp {

/// Named model parameters, ordered by name so iteration (and therefore the
/// optimizer and the checkpoint layout) is deterministic.
class ParameterSet {
 public:
  void set(const std::string& name, Tensor value);
  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  const Tensor& at(const std::string& name) const;
  Tensor& at(const std::string& name);
  const std::map<std::string, Tensor>& entries() const noexcept { return entries_; }
  std::size_t total_size() const;

  /// Puts every entry on the tape: names in `frozen` as constants, the rest
  /// as parameters registered under their own name.
  std::map<std::string, ad::Var> bind(ad::Tape& tape,
                                      const std::set<std::string>& frozen = {}) const;

  friend bool operator==(const ParameterSet& a, const ParameterSet& b) {
    return a.entries_ == b.entries_;
  }

 private:
  std::map<std::string, Tensor> entries_;
};

}  // namespace idsgp
