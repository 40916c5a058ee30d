#ifndef TRANSE_MODEL_HPP
#define TRANSE_MODEL_HPP

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "transe/kb_data.hpp"

namespace transe {

enum class DissimilarityKind { L1, L2, L2Squared };

/// Which score a ranker or predictor uses: the full translation model or the
/// label-blind baseline (translation with a zero label vector).
enum class Scorer { Translate, Unstructured };

inline std::string_view to_string(DissimilarityKind kind) {
  switch (kind) {
    case DissimilarityKind::L1: return "l1";
    case DissimilarityKind::L2: return "l2";
    case DissimilarityKind::L2Squared: return "l2sq";
  }
  return "?";
}

inline DissimilarityKind parse_dissimilarity(std::string_view s) {
  if (s == "l1") return DissimilarityKind::L1;
  if (s == "l2") return DissimilarityKind::L2;
  if (s == "l2sq") return DissimilarityKind::L2Squared;
  throw std::invalid_argument("unknown dissimilarity '" + std::string(s) + "'");
}

inline std::string_view to_string(Scorer scorer) {
  return scorer == Scorer::Translate ? "translate" : "unstructured";
}

inline Scorer parse_scorer(std::string_view s) {
  if (s == "translate") return Scorer::Translate;
  if (s == "unstructured") return Scorer::Unstructured;
  throw std::invalid_argument("unknown scorer '" + std::string(s) + "'");
}

/// Non-negative dissimilarity; lower is more plausible.
struct TripleScore {
  double value = 0.0;
  friend constexpr auto operator<=>(TripleScore, TripleScore) = default;
};

/// d(h + l, t). Every scoring path in the library goes through this kernel
/// so that rankings computed by different routes compare bit-exactly.
inline double translation_distance(const double* h, const double* l, const double* t,
                                   std::size_t k, DissimilarityKind kind) {
  double sum = 0.0;
  if (kind == DissimilarityKind::L1) {
    for (std::size_t i = 0; i < k; ++i) sum += std::fabs(h[i] + l[i] - t[i]);
    return sum;
  }
  for (std::size_t i = 0; i < k; ++i) {
    double diff = h[i] + l[i] - t[i];
    sum += diff * diff;
  }
  return kind == DissimilarityKind::L2 ? std::sqrt(sum) : sum;
}

class EmbeddingModel {
 public:
  EmbeddingModel(std::size_t num_entities, std::size_t num_relations, std::size_t k,
                 DissimilarityKind dissim, std::uint64_t seed = 0)
      : num_entities_(num_entities),
        num_relations_(num_relations),
        k_(k),
        dissim_(dissim),
        seed_(seed),
        entity_emb_(num_entities * k, 0.0),
        relation_emb_(num_relations * k, 0.0),
        zero_label_(k, 0.0) {
    if (num_entities == 0 || num_relations == 0 || k == 0) {
      throw std::invalid_argument("embedding model needs at least one entity, one relation and k >= 1");
    }
  }

  std::size_t num_entities() const noexcept { return num_entities_; }
  std::size_t num_relations() const noexcept { return num_relations_; }
  std::size_t dim() const noexcept { return k_; }
  DissimilarityKind dissim() const noexcept { return dissim_; }
  std::uint64_t seed() const noexcept { return seed_; }

  std::span<const double> entity(EntityId e) const {
    check(e);
    return {entity_emb_.data() + e.index * k_, k_};
  }
  std::span<double> entity(EntityId e) {
    check(e);
    return {entity_emb_.data() + e.index * k_, k_};
  }
  std::span<const double> relation(RelationId r) const {
    check(r);
    return {relation_emb_.data() + r.index * k_, k_};
  }
  std::span<double> relation(RelationId r) {
    check(r);
    return {relation_emb_.data() + r.index * k_, k_};
  }
  std::span<const double> zero_label() const noexcept { return zero_label_; }

  std::span<const double> entity_table() const noexcept { return entity_emb_; }
  std::span<const double> relation_table() const noexcept { return relation_emb_; }

  void check(EntityId e) const {
    if (e.index >= num_entities_) {
      throw std::out_of_range("entity id " + std::to_string(e.index) + " out of range");
    }
  }
  void check(RelationId r) const {
    if (r.index >= num_relations_) {
      throw std::out_of_range("relation id " + std::to_string(r.index) + " out of range");
    }
  }
  void check(const Triple& t) const {
    check(t.head);
    check(t.label);
    check(t.tail);
  }

  friend bool operator==(const EmbeddingModel& a, const EmbeddingModel& b) {
    return a.k_ == b.k_ && a.dissim_ == b.dissim_ && a.entity_emb_ == b.entity_emb_ &&
           a.relation_emb_ == b.relation_emb_;
  }

 private:
  std::size_t num_entities_;
  std::size_t num_relations_;
  std::size_t k_;
  DissimilarityKind dissim_;
  std::uint64_t seed_;
  std::vector<double> entity_emb_;
  std::vector<double> relation_emb_;
  std::vector<double> zero_label_;
};

inline TripleScore dissimilarity(const EmbeddingModel& model, const Triple& triple) {
  model.check(triple);
  return {translation_distance(model.entity(triple.head).data(),
                               model.relation(triple.label).data(),
                               model.entity(triple.tail).data(), model.dim(), model.dissim())};
}

inline TripleScore dissimilarity_unstructured(const EmbeddingModel& model, const Triple& triple) {
  model.check(triple);
  return {translation_distance(model.entity(triple.head).data(), model.zero_label().data(),
                               model.entity(triple.tail).data(), model.dim(), model.dissim())};
}

inline TripleScore score(const EmbeddingModel& model, const Triple& triple, Scorer scorer) {
  return scorer == Scorer::Translate ? dissimilarity(model, triple)
                                     : dissimilarity_unstructured(model, triple);
}

namespace detail {

inline void fallback_unit_vector(std::span<double> row, std::uint64_t seed, std::uint32_t index) {
  std::mt19937_64 rng(seed ^ (0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(index) + 1)));
  std::normal_distribution<double> normal;
  double norm = 0.0;
  while (norm == 0.0) {
    norm = 0.0;
    for (auto& x : row) {
      x = normal(rng);
      norm += x * x;
    }
  }
  norm = std::sqrt(norm);
  for (auto& x : row) x /= norm;
}

inline std::size_t normalize_row(EmbeddingModel& model, EntityId e) {
  auto row = model.entity(e);
  double norm = 0.0;
  for (double x : row) norm += x * x;
  norm = std::sqrt(norm);
  if (norm == 0.0) {
    fallback_unit_vector(row, model.seed(), e.index);
    return 1;
  }
  for (auto& x : row) x /= norm;
  return 0;
}

}  // namespace detail

/// Rescales the given entity rows to unit L2 norm. Rows with zero norm are
/// replaced by a seeded random unit vector; the count of such rows is
/// returned.
inline std::size_t project_entities(EmbeddingModel& model, std::span<const EntityId> touched) {
  std::size_t replaced = 0;
  for (auto e : touched) replaced += detail::normalize_row(model, e);
  return replaced;
}

inline std::size_t project_all_entities(EmbeddingModel& model) {
  std::size_t replaced = 0;
  for (std::uint32_t i = 0; i < model.num_entities(); ++i) {
    replaced += detail::normalize_row(model, EntityId{i});
  }
  return replaced;
}

/// Rows uniform in [-6/sqrt(k), 6/sqrt(k)], entity rows then normalized.
inline EmbeddingModel init_model(std::size_t num_entities, std::size_t num_relations,
                                 std::size_t k, std::uint64_t seed,
                                 DissimilarityKind dissim = DissimilarityKind::L1) {
  EmbeddingModel model(num_entities, num_relations, k, dissim, seed);
  std::mt19937_64 rng(seed);
  const double bound = 6.0 / std::sqrt(static_cast<double>(k));
  std::uniform_real_distribution<double> uniform(-bound, bound);
  for (std::uint32_t i = 0; i < num_entities; ++i) {
    for (auto& x : model.entity(EntityId{i})) x = uniform(rng);
  }
  for (std::uint32_t j = 0; j < num_relations; ++j) {
    for (auto& x : model.relation(RelationId{j})) x = uniform(rng);
  }
  project_all_entities(model);
  return model;
}

// ---------------------------------------------------------------------------
// Persistence

inline constexpr std::string_view kModelMagic = "kge-translate/";
inline constexpr int kModelVersion = 1;

class ModelFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ModelVersionError : public ModelFormatError {
 public:
  using ModelFormatError::ModelFormatError;
};

class DimensionError : public ModelFormatError {
 public:
  using ModelFormatError::ModelFormatError;
};

struct LoadedModel {
  EmbeddingModel model;
  Dictionary entities;
  Dictionary relations;
};

namespace detail {

inline void write_row(std::ostream& out, std::span<const double> row) {
  char buf[64];
  for (std::size_t i = 0; i < row.size(); ++i) {
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), row[i], std::chars_format::general, 17);
    if (i) out.put(' ');
    out.write(buf, end - buf);
  }
  out.put('\n');
}

inline std::vector<double> parse_row(std::string_view line, std::size_t k, std::size_t lineno) {
  std::vector<double> values;
  values.reserve(k);
  const char* p = line.data();
  const char* end = line.data() + line.size();
  while (p < end) {
    while (p < end && *p == ' ') ++p;
    if (p == end) break;
    double v = 0.0;
    auto [next, ec] = std::from_chars(p, end, v);
    if (ec != std::errc() || (next < end && *next != ' ')) {
      throw ModelFormatError("line " + std::to_string(lineno) + ": malformed number");
    }
    if (!std::isfinite(v)) {
      throw ModelFormatError("line " + std::to_string(lineno) + ": non-finite value");
    }
    values.push_back(v);
    p = next;
  }
  if (values.size() != k) {
    throw DimensionError("line " + std::to_string(lineno) + ": expected " + std::to_string(k) +
                         " values, found " + std::to_string(values.size()));
  }
  return values;
}

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  std::string next(std::string_view expecting) {
    std::string line;
    if (!std::getline(in_, line)) {
      throw ModelFormatError("truncated model file: expected " + std::string(expecting) +
                             " at line " + std::to_string(lineno_ + 1));
    }
    ++lineno_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  }
  std::size_t lineno() const noexcept { return lineno_; }

 private:
  std::istream& in_;
  std::size_t lineno_ = 0;
};

inline std::size_t header_field(const std::string& header, std::string_view key) {
  std::istringstream ss(header);
  std::string token;
  while (ss >> token) {
    auto eq = token.find('=');
    if (eq == std::string::npos || std::string_view(token).substr(0, eq) != key) continue;
    auto value = std::string_view(token).substr(eq + 1);
    std::size_t n = 0;
    auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), n);
    if (ec != std::errc() || p != value.data() + value.size()) break;
    return n;
  }
  throw ModelFormatError("model header missing integer field '" + std::string(key) + "'");
}

inline std::string header_string(const std::string& header, std::string_view key) {
  std::istringstream ss(header);
  std::string token;
  while (ss >> token) {
    auto eq = token.find('=');
    if (eq != std::string::npos && std::string_view(token).substr(0, eq) == key) {
      return token.substr(eq + 1);
    }
  }
  throw ModelFormatError("model header missing field '" + std::string(key) + "'");
}

}  // namespace detail

inline void write_model(std::ostream& out, const EmbeddingModel& model,
                        const Dictionary& entities, const Dictionary& relations) {
  if (entities.size() != model.num_entities() || relations.size() != model.num_relations()) {
    throw DimensionError("dictionary sizes do not match the model tables");
  }
  out << kModelMagic << kModelVersion << '\n';
  out << "k=" << model.dim() << " dissim=" << to_string(model.dissim())
      << " entities=" << model.num_entities() << " relations=" << model.num_relations() << '\n';
  out << "[entities]\n";
  for (const auto& name : entities.names()) out << name << '\n';
  out << "[relations]\n";
  for (const auto& name : relations.names()) out << name << '\n';
  out << "[entity_embeddings]\n";
  for (std::uint32_t i = 0; i < model.num_entities(); ++i) {
    detail::write_row(out, model.entity(EntityId{i}));
  }
  out << "[relation_embeddings]\n";
  for (std::uint32_t j = 0; j < model.num_relations(); ++j) {
    detail::write_row(out, model.relation(RelationId{j}));
  }
}

inline LoadedModel read_model(std::istream& in) {
  detail::LineReader reader(in);
  auto magic = reader.next("version line");
  if (magic.rfind(kModelMagic, 0) != 0) {
    throw ModelFormatError("not a model file (bad first line '" + magic + "')");
  }
  if (magic != std::string(kModelMagic) + std::to_string(kModelVersion)) {
    throw ModelVersionError("unsupported model version '" + magic.substr(kModelMagic.size()) +
                            "', expected " + std::to_string(kModelVersion));
  }
  auto header = reader.next("header line");
  const auto k = detail::header_field(header, "k");
  const auto ne = detail::header_field(header, "entities");
  const auto nr = detail::header_field(header, "relations");
  const auto dissim = parse_dissimilarity(detail::header_string(header, "dissim"));
  if (k == 0 || ne == 0 || nr == 0) throw DimensionError("model header has a zero dimension");

  auto expect_section = [&](std::string_view name) {
    auto line = reader.next(name);
    if (line != name) {
      throw ModelFormatError("line " + std::to_string(reader.lineno()) + ": expected '" +
                             std::string(name) + "', found '" + line + "'");
    }
  };
  auto read_names = [&](Dictionary& dict, std::size_t n, std::string_view what) {
    for (std::size_t i = 0; i < n; ++i) {
      auto name = reader.next(what);
      if (name.empty() || name.front() == '[') {
        throw DimensionError("line " + std::to_string(reader.lineno()) + ": expected " +
                             std::to_string(n) + " " + std::string(what) + " names");
      }
      if (dict.insert(name) != i) {
        throw ModelFormatError("duplicate name '" + name + "'");
      }
    }
  };

  LoadedModel loaded{EmbeddingModel(ne, nr, k, dissim), {}, {}};
  expect_section("[entities]");
  read_names(loaded.entities, ne, "entity");
  expect_section("[relations]");
  read_names(loaded.relations, nr, "relation");
  expect_section("[entity_embeddings]");
  for (std::uint32_t i = 0; i < ne; ++i) {
    auto values = detail::parse_row(reader.next("entity embedding"), k, reader.lineno());
    std::copy(values.begin(), values.end(), loaded.model.entity(EntityId{i}).begin());
  }
  expect_section("[relation_embeddings]");
  for (std::uint32_t j = 0; j < nr; ++j) {
    auto values = detail::parse_row(reader.next("relation embedding"), k, reader.lineno());
    std::copy(values.begin(), values.end(), loaded.model.relation(RelationId{j}).begin());
  }
  return loaded;
}

inline void save_model(const EmbeddingModel& model, const Dictionary& entities,
                       const Dictionary& relations, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_model(out, model, entities, relations);
  if (!out) throw IoError("write failed: " + path.string());
}

inline LoadedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_model(in);
}

}  // namespace transe

#endif  // TRANSE_MODEL_HPP
