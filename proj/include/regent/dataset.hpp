#pragma once

// Dataset loading and encoding.
//
// Feature files (.data):
//   % or # comment lines; first payload line is the header.
//   header  := featurespec ("," featurespec)* "," "label{" c1 "|" c2 ... "}"
//   featurespec := name | name "{" v1 "|" v2 ... "}"
//   Bare names are binary features taking 0/1; braced names are nominal and
//   one-hot encode to columns named "name=value". Rows list one value per
//   feature plus the class label. For binary tasks list the negative class
//   first: a lone network output reads as class index 1 when active.
//
// Sequence files (.dna):
//   rows "label, sequence" over a fixed alphabet (default ACGT), '#' or '%'
//   comments, all sequences equally long. Position i encodes one-hot columns
//   "pos<i+offset>=<base>"; characters outside the alphabet (ambiguity
//   codes) encode as all zeros.

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "regent/example.hpp"
#include "regent/rng.hpp"

namespace regent {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FeatureSpec {
  std::string name;
  std::vector<std::string> values;  // empty = binary 0/1 feature

  bool operator==(const FeatureSpec&) const = default;
};

struct FeatureSpace {
  std::vector<FeatureSpec> features;
  std::vector<std::string> classes;

  bool operator==(const FeatureSpace&) const = default;
};

struct Dataset {
  FeatureSpace space;
  std::vector<std::string> encoded_names;  // post one-hot column names
  Examples examples;
};

namespace detail {

inline std::string strip(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(strip(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(strip(cur));
  return out;
}

inline bool comment_or_blank(const std::string& line) {
  std::string t = strip(line);
  return t.empty() || t[0] == '%' || t[0] == '#';
}

}  // namespace detail

inline std::vector<std::string> encoded_feature_names(const FeatureSpace& fs) {
  std::vector<std::string> names;
  for (const auto& f : fs.features) {
    if (f.values.empty())
      names.push_back(f.name);
    else
      for (const auto& v : f.values) names.push_back(f.name + "=" + v);
  }
  return names;
}

inline Dataset load_features(std::istream& in) {
  Dataset ds;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;

  auto parse_header = [&](const std::string& text) {
    auto fields = detail::split_list(text, ',');
    if (fields.size() < 2)
      throw DataError("header needs at least one feature and the label");
    for (std::size_t i = 0; i < fields.size(); ++i) {
      const std::string& f = fields[i];
      auto brace = f.find('{');
      bool last = (i + 1 == fields.size());
      if (brace == std::string::npos) {
        if (last) throw DataError("last header field must be label{...}");
        if (f.empty()) throw DataError("empty feature name in header");
        ds.space.features.push_back({f, {}});
        continue;
      }
      if (f.back() != '}')
        throw DataError("unterminated '{' in header field '" + f + "'");
      std::string name = detail::strip(f.substr(0, brace));
      auto values =
          detail::split_list(f.substr(brace + 1, f.size() - brace - 2), '|');
      if (name.empty() || values.empty())
        throw DataError("bad header field '" + f + "'");
      for (const auto& v : values)
        if (v.empty()) throw DataError("empty value in header field '" + f + "'");
      if (last) {
        if (name != "label")
          throw DataError("last header field must be label{...}");
        if (values.size() < 2) throw DataError("need at least two classes");
        ds.space.classes = values;
      } else {
        ds.space.features.push_back({name, values});
      }
    }
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (detail::comment_or_blank(line)) continue;
    if (!have_header) {
      parse_header(detail::strip(line));
      ds.encoded_names = encoded_feature_names(ds.space);
      have_header = true;
      continue;
    }
    auto fields = detail::split_list(detail::strip(line), ',');
    if (fields.size() != ds.space.features.size() + 1)
      throw DataError("line " + std::to_string(line_no) + ": expected " +
                      std::to_string(ds.space.features.size() + 1) +
                      " fields, got " + std::to_string(fields.size()));
    Example ex;
    ex.features.reserve(ds.encoded_names.size());
    for (std::size_t i = 0; i < ds.space.features.size(); ++i) {
      const FeatureSpec& spec = ds.space.features[i];
      const std::string& v = fields[i];
      if (spec.values.empty()) {
        if (v != "0" && v != "1")
          throw DataError("line " + std::to_string(line_no) +
                          ": binary feature '" + spec.name + "' got '" + v +
                          "'");
        ex.features.push_back(v == "1" ? 1.0 : 0.0);
      } else {
        std::size_t hit = spec.values.size();
        for (std::size_t k = 0; k < spec.values.size(); ++k)
          if (spec.values[k] == v) hit = k;
        if (hit == spec.values.size())
          throw DataError("line " + std::to_string(line_no) + ": feature '" +
                          spec.name + "' got unknown value '" + v + "'");
        for (std::size_t k = 0; k < spec.values.size(); ++k)
          ex.features.push_back(k == hit ? 1.0 : 0.0);
      }
    }
    const std::string& lab = fields.back();
    std::size_t li = ds.space.classes.size();
    for (std::size_t k = 0; k < ds.space.classes.size(); ++k)
      if (ds.space.classes[k] == lab) li = k;
    if (li == ds.space.classes.size())
      throw DataError("line " + std::to_string(line_no) + ": unknown label '" +
                      lab + "'");
    ex.label = static_cast<int>(li);
    ds.examples.push_back(std::move(ex));
  }
  if (!have_header) throw DataError("no header line found");
  return ds;
}

inline Dataset load_features(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open '" + path + "'");
  return load_features(f);
}

// Feature-file text for a dataset; load_features(print_features(ds))
// reproduces ds. Nominal features must be strictly one-hot per example.
inline std::string print_features(const Dataset& ds) {
  std::string out;
  for (const auto& f : ds.space.features) {
    out += f.name;
    if (!f.values.empty()) {
      out += '{';
      for (std::size_t i = 0; i < f.values.size(); ++i) {
        if (i) out += '|';
        out += f.values[i];
      }
      out += '}';
    }
    out += ',';
  }
  out += "label{";
  for (std::size_t i = 0; i < ds.space.classes.size(); ++i) {
    if (i) out += '|';
    out += ds.space.classes[i];
  }
  out += "}\n";

  for (const auto& ex : ds.examples) {
    std::size_t col = 0;
    for (const auto& f : ds.space.features) {
      if (f.values.empty()) {
        out += ex.features[col] == 1.0 ? "1" : "0";
        ++col;
      } else {
        std::size_t hot = f.values.size();
        for (std::size_t v = 0; v < f.values.size(); ++v)
          if (ex.features[col + v] == 1.0) {
            if (hot != f.values.size())
              throw DataError("feature '" + f.name + "' is not one-hot");
            hot = v;
          }
        if (hot == f.values.size())
          throw DataError("feature '" + f.name + "' is not one-hot");
        out += f.values[hot];
        col += f.values.size();
      }
      out += ',';
    }
    if (ex.label < 0 ||
        static_cast<std::size_t>(ex.label) >= ds.space.classes.size())
      throw DataError("example label outside the class list");
    out += ds.space.classes[static_cast<std::size_t>(ex.label)];
    out += '\n';
  }
  return out;
}

inline void save_features(const Dataset& ds, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("cannot write '" + path + "'");
  f << print_features(ds);
  if (!f) throw DataError("write failed for '" + path + "'");
}

// positive_label, when given, is forced to class index 1 so a single-output
// network's active state lines up with it (binary files only).
inline Dataset load_dna(std::istream& in, const std::string& alphabet = "ACGT",
                        int offset = 0, const std::string& positive_label = "") {
  if (alphabet.empty()) throw DataError("empty alphabet");
  struct Row {
    std::string label, seq;
  };
  std::vector<Row> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::comment_or_blank(line)) continue;
    auto fields = detail::split_list(detail::strip(line), ',');
    if (fields.size() != 2)
      throw DataError("line " + std::to_string(line_no) +
                      ": expected 'label, sequence'");
    if (fields[0].empty() || fields[1].empty())
      throw DataError("line " + std::to_string(line_no) + ": empty field");
    rows.push_back({fields[0], fields[1]});
  }
  if (rows.empty()) throw DataError("no sequences found");
  std::size_t len = rows.front().seq.size();
  for (const auto& r : rows)
    if (r.seq.size() != len)
      throw DataError("sequence length mismatch: expected " +
                      std::to_string(len) + ", got '" + r.label + "' with " +
                      std::to_string(r.seq.size()));

  Dataset ds;
  std::vector<std::string> classes;
  for (const auto& r : rows) {
    bool known = false;
    for (const auto& c : classes) known = known || c == r.label;
    if (!known) classes.push_back(r.label);
  }
  if (!positive_label.empty()) {
    if (classes.size() != 2)
      throw DataError("positive label override needs exactly two classes");
    bool present = classes[0] == positive_label || classes[1] == positive_label;
    if (!present)
      throw DataError("positive label '" + positive_label + "' not in data");
    if (classes[0] == positive_label) std::swap(classes[0], classes[1]);
  }
  ds.space.classes = classes;
  std::vector<std::string> bases;
  for (char b : alphabet) bases.push_back(std::string(1, b));
  for (std::size_t i = 0; i < len; ++i) {
    std::string name = "pos" + std::to_string(static_cast<int>(i) + offset);
    ds.space.features.push_back({name, bases});
  }
  ds.encoded_names = encoded_feature_names(ds.space);

  for (const auto& r : rows) {
    Example ex;
    ex.features.assign(len * alphabet.size(), 0.0);
    for (std::size_t i = 0; i < len; ++i) {
      auto hit = alphabet.find(r.seq[i]);
      if (hit != std::string::npos)
        ex.features[i * alphabet.size() + hit] = 1.0;
      // unknown bases (ambiguity codes) stay all-zero
    }
    for (std::size_t k = 0; k < classes.size(); ++k)
      if (classes[k] == r.label) ex.label = static_cast<int>(k);
    ds.examples.push_back(std::move(ex));
  }
  return ds;
}

inline Dataset load_dna(const std::string& path,
                        const std::string& alphabet = "ACGT", int offset = 0,
                        const std::string& positive_label = "") {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open '" + path + "'");
  return load_dna(f, alphabet, offset, positive_label);
}

// Stratified k-fold split. Per class the examples are dealt round-robin from
// a shuffled order, and the dealing cursor carries across classes so overall
// fold sizes differ by at most one.
inline std::vector<std::pair<Examples, Examples>> kfold(
    const Examples& examples, int k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("k must be at least 2");
  if (examples.size() < static_cast<std::size_t>(k))
    throw DataError("fewer examples than folds");

  std::unordered_map<int, std::vector<std::size_t>> by_class;
  std::vector<int> class_order;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    auto [it, fresh] = by_class.try_emplace(examples[i].label);
    if (fresh) class_order.push_back(examples[i].label);
    it->second.push_back(i);
  }

  Rng rng(seed);
  std::vector<int> fold_of(examples.size(), 0);
  int cursor = 0;
  for (int label : class_order) {
    auto members = by_class[label];
    rng.shuffle(members);
    for (std::size_t m : members) {
      fold_of[m] = cursor;
      cursor = (cursor + 1) % k;
    }
  }

  std::vector<std::pair<Examples, Examples>> out(
      static_cast<std::size_t>(k));
  for (int f = 0; f < k; ++f) {
    for (std::size_t i = 0; i < examples.size(); ++i) {
      auto& [train, test] = out[static_cast<std::size_t>(f)];
      (fold_of[i] == f ? test : train).push_back(examples[i]);
    }
  }
  return out;
}

}  // namespace regent
