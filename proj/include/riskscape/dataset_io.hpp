#pragma once

#include <string>

#include "riskscape/models.hpp"

namespace riskscape {

// Binary layout: magic "RSKD", u32 version, u32 family tag, u64 n, u64 d,
// u32 response kind, then row-major f64 features and (when present) f64
// responses. Little-endian throughout.
void write_dataset(const std::string& path, const Dataset& data);
Dataset read_dataset(const std::string& path);

// One row per sample, response in the last column (omitted for kind none).
void write_dataset_csv(const std::string& path, const Dataset& data);
Dataset read_dataset_csv(const std::string& path, ResponseKind kind,
                         std::optional<Family> family = std::nullopt);

}  // namespace riskscape
