#pragma once

#include <string>
#include <vector>

#include "idsgp/data.hpp"
#include "idsgp/models.hpp"

namespace idsgp {

/// A trained model plus what is needed to use it on raw inputs.
struct Checkpoint {
  Model model;
  Task task = Task::regression;
  /// Training-set statistics; predictions on raw inputs go through these.
  Standardization stats;
  std::vector<std::string> feature_names;
  std::string target_name = "y";
  std::size_t epochs = 0;
  /// Resolved configuration the model was trained with.
  std::string config;
};

/// JSON text. Doubles are written in shortest round-trip form, so a
/// save/load cycle reproduces every parameter bitwise.
std::string to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const std::string& text, const std::string& source = "<memory>");

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace idsgp
