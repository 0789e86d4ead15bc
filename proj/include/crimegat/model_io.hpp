#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <string>

#include "crimegat/train.hpp"

namespace crimegat {

// Versioned flat model file: a text header with the schema version and the
// architecture, then every parameter as a decimal float in the enumeration
// order of for_each_param. Floats are written with 17 significant digits so a
// round-trip is value-exact.
inline constexpr int kModelSchemaVersion = 1;

struct ModelFile {
  Method method = Method::crimegat;
  std::optional<AnyModel> net;
  std::optional<SvmLinkModel> svm;
};

void save_model(std::ostream& out, const AnyModel& model);
void save_model(std::ostream& out, const SvmLinkModel& model);
void save_model_file(const std::string& path, const AnyModel& model);
void save_model_file(const std::string& path, const SvmLinkModel& model);

ModelFile load_model(std::istream& in);
ModelFile load_model_file(const std::string& path);

}  // namespace crimegat
