#pragma once

#include <filesystem>

#include "attrevo/domain.hpp"

namespace attrevo {

/// Writes `<manifest>` (JSON: dim, count, class_count, labels, split_tag,
/// dtype "f32", byte_order "little", matrix file name) and the row-major
/// little-endian float32 matrix next to it (manifest stem + ".f32").
void save_embedding_store(const EmbeddingStore& store, const std::filesystem::path& manifest);

/// Validates shape and labels. Rows within 1e-2 of unit norm are
/// re-normalized (rows already within 1e-6 are left bit-for-bit untouched);
/// others are rejected. Throws ShapeMismatch, LabelOutOfRange, NotNormalized.
EmbeddingStore load_embedding_store(const std::filesystem::path& manifest);

}  // namespace attrevo
