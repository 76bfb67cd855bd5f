#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>

#include "attest/genmodel.hpp"
#include "attest/kv_config.hpp"

namespace attest {

/// Binary matrix layout (all little-endian):
///   bytes 0-7   magic "ATTMAT01"
///   bytes 8-11  rows (uint32)
///   bytes 12-15 cols (uint32)
///   then rows*cols IEEE-754 binary64 values, row-major.
inline constexpr std::array<char, 8> kMatrixMagic{'A', 'T', 'T', 'M', 'A', 'T', '0', '1'};

void write_matrix(std::ostream& out, const Matrix& m);
Matrix read_matrix(std::istream& in);

void write_matrix_file(const std::filesystem::path& path, const Matrix& m);
Matrix read_matrix_file(const std::filesystem::path& path);

/// GeneratorConfig <-> key-value text. Recognized keys: d, m, N, lambda,
/// alphas, betas, epsilon_p, n_products, n_queries, seed. All are required.
/// alphas/betas accept a comma list of N values, a single value repeated
/// over all positions, or (alphas only) "linear_variance(f)".
GeneratorConfig generator_config_from_kv(const KeyValueConfig& kv);
KeyValueConfig generator_config_to_kv(const GeneratorConfig& config);

/// Dataset directory layout:
///   config.txt    resolved GeneratorConfig
///   vocab.bin     m x d binary matrix
///   products.bin  n_products x d binary matrix
///   queries.tsv   one line per query: product_id, then trigram ids
///   edges.tsv     one "u\tv" line per undirected edge, u < v, sorted
/// Purchases are implied: each query bought its generating product once.
void save_dataset(const SyntheticDataset& ds, const std::filesystem::path& dir);
SyntheticDataset load_dataset(const std::filesystem::path& dir);

}  // namespace attest
