#pragma once

#include <memory>
#include <string>

#include "misem/embedding.hpp"

namespace misem::embed {

/// Builds a backend from "mock:<seed>[:<dim>]", "cache:<path>" or "http:<url>".
std::unique_ptr<Backend> make_backend(const std::string& spec);

/// Throws InvalidArgument when the spec is not one of the recognised forms.
void validate_backend_spec(const std::string& spec);

}  // namespace misem::embed
