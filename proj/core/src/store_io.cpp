#include "attrevo/store_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "attrevo/error.hpp"

namespace attrevo {

namespace {

std::uint32_t to_little(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    v = ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
  }
  return v;
}

constexpr double kLoadRenormalizeTolerance = 1e-2;
constexpr double kExactNormTolerance = 1e-6;

}  // namespace

void save_embedding_store(const EmbeddingStore& store, const std::filesystem::path& manifest) {
  const std::filesystem::path matrix = manifest.parent_path() / (manifest.stem().string() + ".f32");
  nlohmann::json j{{"dim", store.dim()},
                   {"count", store.size()},
                   {"class_count", store.class_count()},
                   {"labels", store.labels()},
                   {"split_tag", std::string(to_string(store.split()))},
                   {"dtype", "f32"},
                   {"byte_order", "little"},
                   {"matrix", matrix.filename().string()}};
  std::ofstream m(manifest, std::ios::trunc);
  if (!m) throw Error(Errc::Io, "cannot write " + manifest.string());
  m << j.dump(2) << '\n';

  std::ofstream out(matrix, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::Io, "cannot write " + matrix.string());
  for (float f : store.data()) {
    const std::uint32_t bits = to_little(std::bit_cast<std::uint32_t>(f));
    out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
  }
  if (!out) throw Error(Errc::Io, "short write to " + matrix.string());
}

EmbeddingStore load_embedding_store(const std::filesystem::path& manifest) {
  std::ifstream m(manifest);
  if (!m) throw Error(Errc::Io, "cannot open manifest " + manifest.string());
  nlohmann::json j;
  std::size_t dim = 0, count = 0;
  int class_count = 0;
  std::vector<int> labels;
  SplitTag split{};
  std::filesystem::path matrix;
  try {
    j = nlohmann::json::parse(m);
    if (j.value("dtype", "f32") != "f32" || j.value("byte_order", "little") != "little") {
      throw Error(Errc::ShapeMismatch, "only little-endian f32 matrices are supported");
    }
    dim = j.at("dim").get<std::size_t>();
    count = j.at("count").get<std::size_t>();
    class_count = j.at("class_count").get<int>();
    labels = j.at("labels").get<std::vector<int>>();
    split = split_from_string(j.at("split_tag").get<std::string>());
    matrix = manifest.parent_path() /
             j.value("matrix", manifest.stem().string() + ".f32");
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ShapeMismatch, "bad manifest " + manifest.string() + ": " + e.what());
  }
  if (labels.size() != count) {
    throw Error(Errc::ShapeMismatch, "manifest lists " + std::to_string(labels.size()) +
                                         " labels for " + std::to_string(count) + " rows");
  }
  std::ifstream in(matrix, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open matrix " + matrix.string());
  const auto bytes = std::filesystem::file_size(matrix);
  if (bytes != count * dim * sizeof(float)) {
    throw Error(Errc::ShapeMismatch, "matrix holds " + std::to_string(bytes / sizeof(float) / (dim ? dim : 1)) +
                                         " rows, manifest says " + std::to_string(count));
  }
  std::vector<float> data(count * dim);
  for (float& f : data) {
    std::uint32_t bits = 0;
    in.read(reinterpret_cast<char*>(&bits), sizeof bits);
    f = std::bit_cast<float>(to_little(bits));
  }
  if (!in) throw Error(Errc::Io, "short read from " + matrix.string());

  for (std::size_t i = 0; i < count; ++i) {
    std::span<float> row(data.data() + i * dim, dim);
    double sq = 0.0;
    for (float x : row) sq += static_cast<double>(x) * x;
    const double norm = std::sqrt(sq);
    if (!std::isfinite(norm) || std::abs(norm - 1.0) > kLoadRenormalizeTolerance) {
      throw Error(Errc::NotNormalized, "row " + std::to_string(i) + " has norm " + std::to_string(norm));
    }
    if (std::abs(norm - 1.0) > kExactNormTolerance) {
      for (float& x : row) x = static_cast<float>(x / norm);
    }
  }
  return EmbeddingStore::create(dim, class_count, split, std::move(data), std::move(labels));
}

}  // namespace attrevo
