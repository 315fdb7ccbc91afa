#pragma once

#include <iosfwd>
#include <memory>
#include <string>

#include "triagekit/models/common.hpp"

namespace triagekit {

/// Versioned self-describing text blob; parameters round-trip bit-exactly.
void save_model(const Model& model, std::ostream& out);
std::unique_ptr<Model> load_model(std::istream& in);

void save_model_file(const Model& model, const std::string& path);
std::unique_ptr<Model> load_model_file(const std::string& path);

} // namespace triagekit
