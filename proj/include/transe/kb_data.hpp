#ifndef TRANSE_KB_DATA_HPP
#define TRANSE_KB_DATA_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <vector>

namespace transe {

struct EntityId {
  std::uint32_t index = 0;
  friend constexpr bool operator==(EntityId, EntityId) = default;
  friend constexpr auto operator<=>(EntityId, EntityId) = default;
};

struct RelationId {
  std::uint32_t index = 0;
  friend constexpr bool operator==(RelationId, RelationId) = default;
  friend constexpr auto operator<=>(RelationId, RelationId) = default;
};

struct Triple {
  EntityId head;
  RelationId label;
  EntityId tail;
  friend constexpr bool operator==(const Triple&, const Triple&) = default;
};

/// One raw `head\tlabel\ttail` record, with the 1-based source line kept for
/// error messages.
struct TripleRecord {
  std::string head;
  std::string label;
  std::string tail;
  std::size_t line = 0;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : std::runtime_error(source + ":" + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// An id in valid/test that never occurs in train.
class ClosureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Name <-> dense id bijection. Ids are handed out in first-insertion order.
class Dictionary {
 public:
  std::uint32_t insert(std::string_view name) {
    auto it = name_to_id_.find(std::string(name));
    if (it != name_to_id_.end()) return it->second;
    auto id = static_cast<std::uint32_t>(id_to_name_.size());
    id_to_name_.emplace_back(name);
    name_to_id_.emplace(id_to_name_.back(), id);
    return id;
  }

  std::optional<std::uint32_t> find(std::string_view name) const {
    auto it = name_to_id_.find(std::string(name));
    if (it == name_to_id_.end()) return std::nullopt;
    return it->second;
  }

  const std::string& name(std::uint32_t id) const { return id_to_name_.at(id); }
  std::size_t size() const noexcept { return id_to_name_.size(); }
  bool empty() const noexcept { return id_to_name_.empty(); }
  std::span<const std::string> names() const noexcept { return id_to_name_; }

  friend bool operator==(const Dictionary& a, const Dictionary& b) {
    return a.id_to_name_ == b.id_to_name_;
  }

 private:
  std::unordered_map<std::string, std::uint32_t> name_to_id_;
  std::vector<std::string> id_to_name_;
};

struct KnowledgeBase {
  Dictionary entities;
  Dictionary relations;
  std::vector<Triple> train;
  std::vector<Triple> valid;
  std::vector<Triple> test;

  std::size_t num_entities() const noexcept { return entities.size(); }
  std::size_t num_relations() const noexcept { return relations.size(); }
};

namespace detail {

inline std::string_view strip_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

}  // namespace detail

/// Reads tab-separated triple records. Blank lines are skipped; any other
/// line must hold exactly three non-empty fields.
inline std::vector<TripleRecord> read_triple_records(std::istream& in,
                                                     const std::string& source = "<stream>") {
  std::vector<TripleRecord> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view view = detail::strip_cr(line);
    if (view.empty()) continue;
    std::string_view fields[3];
    std::size_t nfields = 0;
    std::size_t start = 0;
    while (true) {
      auto tab = view.find('\t', start);
      auto field = view.substr(start, tab == std::string_view::npos ? std::string_view::npos
                                                                    : tab - start);
      if (nfields < 3) fields[nfields] = field;
      ++nfields;
      if (tab == std::string_view::npos) break;
      start = tab + 1;
    }
    if (nfields != 3) {
      throw ParseError(source, lineno,
                       "expected 3 tab-separated fields, found " + std::to_string(nfields));
    }
    for (auto& f : fields) {
      if (f.empty()) throw ParseError(source, lineno, "empty field");
    }
    records.push_back({std::string(fields[0]), std::string(fields[1]), std::string(fields[2]),
                       lineno});
  }
  return records;
}

inline std::vector<TripleRecord> read_triple_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return read_triple_records(in, path.string());
}

inline std::pair<Dictionary, Dictionary> build_dictionaries(
    std::span<const TripleRecord> train_records) {
  Dictionary entities;
  Dictionary relations;
  for (const auto& r : train_records) {
    entities.insert(r.head);
    relations.insert(r.label);
    entities.insert(r.tail);
  }
  return {std::move(entities), std::move(relations)};
}

inline std::vector<Triple> parse_triples(std::span<const TripleRecord> records,
                                         const Dictionary& entities,
                                         const Dictionary& relations,
                                         std::string_view split = "input") {
  std::vector<Triple> triples;
  triples.reserve(records.size());
  auto entity = [&](const std::string& name, std::size_t line) {
    auto id = entities.find(name);
    if (!id) {
      throw ClosureError("unknown entity " + name + " in " + std::string(split) + " (line " +
                         std::to_string(line) + ")");
    }
    return EntityId{*id};
  };
  for (const auto& r : records) {
    auto h = entity(r.head, r.line);
    auto l = relations.find(r.label);
    if (!l) {
      throw ClosureError("unknown relation " + r.label + " in " + std::string(split) +
                         " (line " + std::to_string(r.line) + ")");
    }
    auto t = entity(r.tail, r.line);
    triples.push_back({h, RelationId{*l}, t});
  }
  return triples;
}

inline void write_triples(std::ostream& out, std::span<const Triple> triples,
                          const Dictionary& entities, const Dictionary& relations) {
  for (const auto& t : triples) {
    out << entities.name(t.head.index) << '\t' << relations.name(t.label.index) << '\t'
        << entities.name(t.tail.index) << '\n';
  }
}

/// Builds a knowledge base from in-memory records. The train split defines
/// both dictionaries; valid and test must be closed over them.
inline KnowledgeBase make_knowledge_base(std::span<const TripleRecord> train,
                                         std::span<const TripleRecord> valid,
                                         std::span<const TripleRecord> test) {
  KnowledgeBase kb;
  std::tie(kb.entities, kb.relations) = build_dictionaries(train);
  kb.train = parse_triples(train, kb.entities, kb.relations, "train");
  kb.valid = parse_triples(valid, kb.entities, kb.relations, "valid");
  kb.test = parse_triples(test, kb.entities, kb.relations, "test");
  return kb;
}

/// Loads the three split files. Train and valid must be non-empty; the test
/// path is optional for training-only runs.
inline KnowledgeBase load_dataset(const std::filesystem::path& train_path,
                                  const std::filesystem::path& valid_path,
                                  const std::optional<std::filesystem::path>& test_path) {
  auto train = read_triple_file(train_path);
  auto valid = read_triple_file(valid_path);
  std::vector<TripleRecord> test;
  if (test_path) test = read_triple_file(*test_path);
  if (train.empty()) throw IoError("train split is empty: " + train_path.string());
  if (valid.empty()) throw IoError("valid split is empty: " + valid_path.string());
  if (test_path && test.empty()) throw IoError("test split is empty: " + test_path->string());
  return make_knowledge_base(train, valid, test);
}

inline KnowledgeBase load_dataset(const std::filesystem::path& train_path,
                                  const std::filesystem::path& valid_path,
                                  const std::filesystem::path& test_path) {
  return load_dataset(train_path, valid_path, std::optional<std::filesystem::path>(test_path));
}

/// True when every id used by valid/test also occurs in some train triple.
inline bool is_closed(const KnowledgeBase& kb) {
  std::vector<bool> seen_entity(kb.num_entities(), false);
  std::vector<bool> seen_relation(kb.num_relations(), false);
  for (const auto& t : kb.train) {
    seen_entity[t.head.index] = seen_entity[t.tail.index] = true;
    seen_relation[t.label.index] = true;
  }
  auto covered = [&](std::span<const Triple> split) {
    for (const auto& t : split) {
      if (t.head.index >= kb.num_entities() || t.tail.index >= kb.num_entities() ||
          t.label.index >= kb.num_relations())
        return false;
      if (!seen_entity[t.head.index] || !seen_entity[t.tail.index] ||
          !seen_relation[t.label.index])
        return false;
    }
    return true;
  };
  return covered(kb.valid) && covered(kb.test);
}

}  // namespace transe

#endif  // TRANSE_KB_DATA_HPP
