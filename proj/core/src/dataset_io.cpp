#include "attest/dataset_io.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace attest {
namespace {

static_assert(std::endian::native == std::endian::little,
              "binary formats are written in host order; big-endian hosts need byte swaps");

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) {
    throw std::runtime_error("matrix: truncated header");
  }
  return v;
}

std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > UINT32_MAX) throw std::length_error(std::string(what) + " exceeds uint32 range");
  return static_cast<std::uint32_t>(v);
}

std::string join_values(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += format_double(values[i]);
  }
  return out;
}

std::vector<double> per_position(const KeyValueConfig& kv, std::string_view key,
                                 std::size_t n) {
  const std::string& raw = kv.get_string(key);
  constexpr std::string_view kLinear = "linear_variance(";
  if (raw.starts_with(kLinear) && raw.ends_with(")")) {
    if (key != "alphas") {
      throw std::invalid_argument("linear_variance(...) is only valid for alphas");
    }
    const double fraction =
        parse_double(std::string_view(raw).substr(kLinear.size(), raw.size() - kLinear.size() - 1),
                     key);
    return linear_variance_alphas(n, fraction);
  }
  auto values = kv.get_doubles(key);
  if (values.size() == 1) values.assign(n, values.front());
  if (values.size() != n) {
    throw std::invalid_argument("config key '" + std::string(key) +
                                "' needs 1 or N values");
  }
  return values;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

}  // namespace

void write_matrix(std::ostream& out, const Matrix& m) {
  out.write(kMatrixMagic.data(), kMatrixMagic.size());
  write_u32(out, checked_u32(m.rows(), "rows"));
  write_u32(out, checked_u32(m.cols(), "cols"));
  const auto data = m.data();
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(double)));
  if (!out) throw std::runtime_error("matrix: write failed");
}

Matrix read_matrix(std::istream& in) {
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMatrixMagic) {
    throw std::runtime_error("matrix: bad magic");
  }
  const std::uint32_t rows = read_u32(in);
  const std::uint32_t cols = read_u32(in);
  Matrix m(rows, cols);
  auto data = m.data();
  if (!in.read(reinterpret_cast<char*>(data.data()),
               static_cast<std::streamsize>(data.size() * sizeof(double)))) {
    throw std::runtime_error("matrix: truncated payload");
  }
  return m;
}

void write_matrix_file(const std::filesystem::path& path, const Matrix& m) {
  auto out = open_out(path);
  write_matrix(out, m);
}

Matrix read_matrix_file(const std::filesystem::path& path) {
  auto in = open_in(path);
  Matrix m = read_matrix(in);
  if (in.peek() != std::char_traits<char>::eof()) {
    throw std::runtime_error("matrix: trailing bytes in " + path.string());
  }
  return m;
}

GeneratorConfig generator_config_from_kv(const KeyValueConfig& kv) {
  GeneratorConfig c;
  c.d = kv.get_uint("d");
  c.m = kv.get_uint("m");
  c.max_length = kv.get_uint("N");
  c.lambda = kv.get_double("lambda");
  c.alphas = per_position(kv, "alphas", c.max_length);
  c.betas = per_position(kv, "betas", c.max_length);
  c.epsilon_p = kv.get_double("epsilon_p");
  c.n_products = kv.get_uint("n_products");
  c.n_queries = kv.get_uint("n_queries");
  c.seed = kv.get_uint("seed");
  c.validate();
  return c;
}

KeyValueConfig generator_config_to_kv(const GeneratorConfig& c) {
  KeyValueConfig kv;
  kv.set("d", std::to_string(c.d));
  kv.set("m", std::to_string(c.m));
  kv.set("N", std::to_string(c.max_length));
  kv.set("lambda", format_double(c.lambda));
  kv.set("alphas", join_values(c.alphas));
  kv.set("betas", join_values(c.betas));
  kv.set("epsilon_p", format_double(c.epsilon_p));
  kv.set("n_products", std::to_string(c.n_products));
  kv.set("n_queries", std::to_string(c.n_queries));
  kv.set("seed", std::to_string(c.seed));
  return kv;
}

void save_dataset(const SyntheticDataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  generator_config_to_kv(ds.config).save(dir / "config.txt");
  write_matrix_file(dir / "vocab.bin", ds.vocab);
  write_matrix_file(dir / "products.bin", ds.products);

  {
    auto out = open_out(dir / "queries.tsv");
    std::string line;
    for (const Query& q : ds.queries) {
      line = std::to_string(q.product);
      for (TrigramId t : q.trigrams) {
        line += '\t';
        line += std::to_string(t);
      }
      line += '\n';
      out << line;
    }
    if (!out) throw std::runtime_error("write failed for queries.tsv");
  }
  {
    auto out = open_out(dir / "edges.tsv");
    for (auto [u, v] : ds.graph.edges()) out << u << '\t' << v << '\n';
    if (!out) throw std::runtime_error("write failed for edges.tsv");
  }
}

SyntheticDataset load_dataset(const std::filesystem::path& dir) {
  SyntheticDataset ds;
  ds.config = generator_config_from_kv(KeyValueConfig::load(dir / "config.txt"));
  ds.vocab = read_matrix_file(dir / "vocab.bin");
  ds.products = read_matrix_file(dir / "products.bin");
  if (ds.vocab.rows() != ds.config.m || ds.vocab.cols() != ds.config.d) {
    throw std::runtime_error("vocab.bin shape does not match config");
  }
  if (ds.products.rows() != ds.config.n_products || ds.products.cols() != ds.config.d) {
    throw std::runtime_error("products.bin shape does not match config");
  }

  {
    auto in = open_in(dir / "queries.tsv");
    std::string line;
    while (std::getline(in, line)) {
      std::istringstream fields(line);
      Query q;
      std::string token;
      if (!std::getline(fields, token, '\t')) throw std::runtime_error("queries.tsv: empty line");
      q.product = static_cast<ProductId>(parse_uint(token, "product id"));
      while (std::getline(fields, token, '\t')) {
        q.trigrams.push_back(static_cast<TrigramId>(parse_uint(token, "trigram id")));
      }
      if (q.product >= ds.config.n_products) throw std::runtime_error("queries.tsv: bad product");
      if (q.trigrams.empty() || q.trigrams.size() > ds.config.max_length) {
        throw std::runtime_error("queries.tsv: query length out of range");
      }
      for (TrigramId t : q.trigrams) {
        if (t >= ds.config.m) throw std::runtime_error("queries.tsv: trigram id out of range");
      }
      ds.queries.push_back(std::move(q));
    }
  }
  if (ds.queries.size() != ds.config.n_queries) {
    throw std::runtime_error("queries.tsv: query count does not match config");
  }

  std::vector<std::pair<QueryId, QueryId>> edges;
  {
    auto in = open_in(dir / "edges.tsv");
    std::string line;
    while (std::getline(in, line)) {
      const auto tab = line.find('\t');
      if (tab == std::string::npos) throw std::runtime_error("edges.tsv: malformed line");
      const auto u = static_cast<QueryId>(parse_uint(std::string_view(line).substr(0, tab), "u"));
      const auto v = static_cast<QueryId>(parse_uint(std::string_view(line).substr(tab + 1), "v"));
      if (u >= v) throw std::runtime_error("edges.tsv: expected u < v");
      edges.emplace_back(u, v);
    }
  }
  ds.graph = QueryGraph::from_edges(ds.queries.size(), edges);
  ds.purchases.resize(ds.queries.size());
  for (QueryId q = 0; q < ds.queries.size(); ++q) {
    ds.purchases[q] = {Purchase{ds.queries[q].product, 1}};
  }
  return ds;
}

}  // namespace attest
