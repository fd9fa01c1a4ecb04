#pragma once

#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "tsodso/milp/model.hpp"

namespace tsodso::milp {

namespace detail {

inline std::string fmt_num(double v) {
  if (v == kInf) return "1e+30";
  if (v == -kInf) return "-1e+30";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_num(const std::string& tok, std::size_t line, std::size_t col) {
  try {
    std::size_t used = 0;
    double v = std::stod(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    if (v >= 1e30) return kInf;
    if (v <= -1e30) return -kInf;
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::Parse, "line " + std::to_string(line) + ", column " + std::to_string(col) +
                                      ": expected a number, got '" + tok + "'");
  }
}

/// MPS names may not contain blanks and must be unique within their namespace.
inline std::vector<std::string> mps_names(const std::vector<std::string>& raw, const std::string& stem,
                                          std::set<std::string>& taken) {
  std::vector<std::string> out;
  out.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    std::string s = raw[i].empty() ? stem + std::to_string(i) : raw[i];
    for (char& ch : s)
      if (ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r') ch = '_';
    std::string base = s;
    for (int k = 1; taken.count(s); ++k) s = base + "#" + std::to_string(k);
    taken.insert(s);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace detail

/// Free-format MPS with OBJSENSE, ROWS, COLUMNS, RHS, RANGES, BOUNDS, SOS sections.
inline std::string export_mps(const MilpModel& m) {
  std::set<std::string> row_taken{"OBJ"};
  std::vector<std::string> raw;
  for (const auto& r : m.constraints()) raw.push_back(r.name);
  auto rows = detail::mps_names(raw, "R", row_taken);
  std::set<std::string> col_taken;
  raw.clear();
  for (const auto& v : m.variables()) raw.push_back(v.name);
  auto cols = detail::mps_names(raw, "C", col_taken);
  std::set<std::string> sos_taken;
  raw.clear();
  for (const auto& s : m.sos1_sets()) raw.push_back(s.name);
  auto sosn = detail::mps_names(raw, "S", sos_taken);

  std::ostringstream o;
  o << "NAME " << (m.name().empty() ? "model" : m.name()) << "\n";
  o << "OBJSENSE\n    " << (m.objective_sense() == ObjSense::Maximize ? "MAX" : "MIN") << "\n";
  o << "ROWS\n N  OBJ\n";
  for (std::size_t i = 0; i < m.num_rows(); ++i) {
    char t = m.constraints()[i].sense == Sense::LessEqual ? 'L'
             : m.constraints()[i].sense == Sense::Equal   ? 'E'
                                                          : 'G';
    o << " " << t << "  " << rows[i] << "\n";
  }
  // column-major view
  std::vector<std::vector<std::pair<std::size_t, double>>> by_col(m.num_vars());
  for (std::size_t i = 0; i < m.num_rows(); ++i)
    for (const auto& t : m.constraints()[i].terms) by_col[t.var].push_back({i, t.coef});
  o << "COLUMNS\n";
  for (std::size_t j = 0; j < m.num_vars(); ++j) {
    const auto& c = cols[j];
    bool wrote = false;
    if (m.objective()[j] != 0.0) {
      o << "    " << c << "  OBJ  " << detail::fmt_num(m.objective()[j]) << "\n";
      wrote = true;
    }
    for (const auto& [i, a] : by_col[j]) {
      o << "    " << c << "  " << rows[i] << "  " << detail::fmt_num(a) << "\n";
      wrote = true;
    }
    if (!wrote) o << "    " << c << "  OBJ  0\n";
  }
  o << "RHS\n";
  if (m.objective_constant() != 0.0) o << "    RHS  OBJ  " << detail::fmt_num(-m.objective_constant()) << "\n";
  for (std::size_t i = 0; i < m.num_rows(); ++i)
    if (m.constraints()[i].rhs != 0.0)
      o << "    RHS  " << rows[i] << "  " << detail::fmt_num(m.constraints()[i].rhs) << "\n";
  o << "RANGES\n";
  o << "BOUNDS\n";
  for (std::size_t j = 0; j < m.num_vars(); ++j) {
    const auto& v = m.variable(j);
    const auto& c = cols[j];
    if (v.kind == VarKind::Binary) {
      o << " BV BND  " << c << "\n";
      if (v.lower == v.upper) {
        o << " FX BND  " << c << "  " << detail::fmt_num(v.lower) << "\n";
      } else {
        if (v.lower != 0.0) o << " LO BND  " << c << "  " << detail::fmt_num(v.lower) << "\n";
        if (v.upper != 1.0) o << " UP BND  " << c << "  " << detail::fmt_num(v.upper) << "\n";
      }
      continue;
    }
    if (v.lower == v.upper) {
      o << " FX BND  " << c << "  " << detail::fmt_num(v.lower) << "\n";
    } else if (v.lower == -kInf && v.upper == kInf) {
      o << " FR BND  " << c << "\n";
    } else {
      if (v.lower == -kInf) o << " MI BND  " << c << "\n";
      else if (v.lower != 0.0 || v.upper < 0.0) o << " LO BND  " << c << "  " << detail::fmt_num(v.lower) << "\n";
      if (v.upper != kInf) o << " UP BND  " << c << "  " << detail::fmt_num(v.upper) << "\n";
    }
  }
  o << "SOS\n";
  for (std::size_t k = 0; k < m.sos1_sets().size(); ++k) {
    o << " S1 SOS  " << sosn[k] << "  1\n";
    const auto& mem = m.sos1_sets()[k].members;
    for (std::size_t p = 0; p < mem.size(); ++p) o << "    " << cols[mem[p]] << ":" << (p + 1) << "\n";
  }
  o << "ENDATA\n";
  return o.str();
}

inline MilpModel import_mps(std::string_view text) {
  MilpModel m;
  enum class Sec { None, Name, ObjSense, Rows, Columns, Rhs, Ranges, Bounds, Sos, End };
  Sec sec = Sec::None;
  std::string obj_row;
  std::map<std::string, std::size_t> row_idx, col_idx;
  std::vector<std::string> row_names;
  std::vector<Sense> row_sense;
  std::vector<std::vector<Term>> row_terms;
  std::vector<double> row_rhs;
  std::vector<double> range;
  std::vector<bool> has_range;
  std::vector<double> obj;
  double obj_const = 0.0;
  ObjSense sense = ObjSense::Minimize;
  bool in_int_marker = false;
  struct Col {
    std::string name;
    double lo = 0.0, up = kInf;
    bool integer = false, binary = false;
  };
  std::vector<Col> cols;
  std::vector<Sos1> sos;
  std::string name = "model";
  bool saw_end = false;

  auto fail = [](std::size_t line, std::size_t col, const std::string& why) -> Error {
    return Error(ErrorCode::Parse, "line " + std::to_string(line) + ", column " + std::to_string(col) + ": " + why);
  };

  std::size_t lineno = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string line(text.substr(start, end - start));
    start = end + 1;
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '*') {
      if (end == text.size()) break;
      continue;
    }
    // tokenize with column positions
    std::vector<std::pair<std::string, std::size_t>> tok;
    for (std::size_t i = 0; i < line.size();) {
      while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
      if (i >= line.size()) break;
      std::size_t b = i;
      while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
      tok.push_back({line.substr(b, i - b), b + 1});
    }
    if (tok.empty()) {
      if (end == text.size()) break;
      continue;
    }
    bool header = line[0] != ' ' && line[0] != '\t';
    if (header) {
      const std::string& h = tok[0].first;
      if (h == "NAME") {
        sec = Sec::Name;
        if (tok.size() > 1) name = tok[1].first;
      } else if (h == "OBJSENSE") {
        sec = Sec::ObjSense;
        if (tok.size() > 1) sense = tok[1].first == "MAX" || tok[1].first == "MAXIMIZE" ? ObjSense::Maximize : ObjSense::Minimize;
      } else if (h == "ROWS") sec = Sec::Rows;
      else if (h == "COLUMNS") sec = Sec::Columns;
      else if (h == "RHS") sec = Sec::Rhs;
      else if (h == "RANGES") sec = Sec::Ranges;
      else if (h == "BOUNDS") sec = Sec::Bounds;
      else if (h == "SOS") sec = Sec::Sos;
      else if (h == "ENDATA") {
        sec = Sec::End;
        saw_end = true;
      } else {
        throw fail(lineno, 1, "unknown section '" + h + "'");
      }
      if (end == text.size()) break;
      continue;
    }
    auto need = [&](std::size_t k) {
      if (tok.size() < k) throw fail(lineno, tok.back().second, "too few fields");
    };
    auto col_of = [&](const std::string& c, std::size_t at) -> std::size_t {
      auto it = col_idx.find(c);
      if (it == col_idx.end()) throw fail(lineno, at, "unknown column '" + c + "'");
      return it->second;
    };
    auto row_of = [&](const std::string& r, std::size_t at) -> std::size_t {
      auto it = row_idx.find(r);
      if (it == row_idx.end()) throw fail(lineno, at, "unknown row '" + r + "'");
      return it->second;
    };
    switch (sec) {
      case Sec::ObjSense: {
        const auto& s = tok[0].first;
        if (s == "MAX" || s == "MAXIMIZE") sense = ObjSense::Maximize;
        else if (s == "MIN" || s == "MINIMIZE") sense = ObjSense::Minimize;
        else throw fail(lineno, tok[0].second, "bad OBJSENSE '" + s + "'");
        break;
      }
      case Sec::Rows: {
        need(2);
        const auto& t = tok[0].first;
        if (t == "N") {
          if (obj_row.empty()) obj_row = tok[1].first;
          break;
        }
        Sense s;
        if (t == "L") s = Sense::LessEqual;
        else if (t == "G") s = Sense::GreaterEqual;
        else if (t == "E") s = Sense::Equal;
        else throw fail(lineno, tok[0].second, "bad row type '" + t + "'");
        if (row_idx.count(tok[1].first)) throw fail(lineno, tok[1].second, "duplicate row");
        row_idx[tok[1].first] = row_names.size();
        row_names.push_back(tok[1].first);
        row_sense.push_back(s);
        row_terms.emplace_back();
        row_rhs.push_back(0.0);
        range.push_back(0.0);
        has_range.push_back(false);
        break;
      }
      case Sec::Columns: {
        need(2);
        if (tok.size() >= 3 && tok[1].first == "'MARKER'") {
          if (tok[2].first == "'INTORG'") in_int_marker = true;
          else if (tok[2].first == "'INTEND'") in_int_marker = false;
          else throw fail(lineno, tok[2].second, "bad marker");
          break;
        }
        const auto& c = tok[0].first;
        std::size_t j;
        auto it = col_idx.find(c);
        if (it == col_idx.end()) {
          j = cols.size();
          col_idx[c] = j;
          cols.push_back({c});
          obj.push_back(0.0);
          if (in_int_marker) {
            cols[j].integer = true;
          }
        } else {
          j = it->second;
        }
        if ((tok.size() - 1) % 2 != 0) throw fail(lineno, tok.back().second, "unpaired row/value");
        for (std::size_t k = 1; k + 1 < tok.size(); k += 2) {
          double v = detail::parse_num(tok[k + 1].first, lineno, tok[k + 1].second);
          if (tok[k].first == obj_row) obj[j] += v;
          else row_terms[row_of(tok[k].first, tok[k].second)].push_back({j, v});
        }
        break;
      }
      case Sec::Rhs:
      case Sec::Ranges: {
        need(2);
        std::size_t k0 = tok.size() % 2 == 1 ? 1 : 0;  // optional set name
        for (std::size_t k = k0; k + 1 < tok.size(); k += 2) {
          double v = detail::parse_num(tok[k + 1].first, lineno, tok[k + 1].second);
          if (tok[k].first == obj_row) {
            if (sec == Sec::Rhs) obj_const = -v;
            continue;
          }
          std::size_t i = row_of(tok[k].first, tok[k].second);
          if (sec == Sec::Rhs) row_rhs[i] = v;
          else {
            range[i] = v;
            has_range[i] = true;
          }
        }
        break;
      }
      case Sec::Bounds: {
        need(2);
        const auto& t = tok[0].first;
        bool novalue = t == "FR" || t == "MI" || t == "PL" || t == "BV";
        std::size_t ci = novalue ? tok.size() - 1 : (tok.size() >= 4 ? 2 : 1);
        std::size_t j = col_of(tok[ci].first, tok[ci].second);
        auto& c = cols[j];
        double v = 0.0;
        if (!novalue) {
          if (ci + 1 >= tok.size()) throw fail(lineno, tok.back().second, "missing bound value");
          v = detail::parse_num(tok[ci + 1].first, lineno, tok[ci + 1].second);
        }
        if (t == "UP") c.up = v;
        else if (t == "LO") c.lo = v;
        else if (t == "FX") c.lo = c.up = v;
        else if (t == "FR") {
          c.lo = -kInf;
          c.up = kInf;
        } else if (t == "MI") c.lo = -kInf;
        else if (t == "PL") c.up = kInf;
        else if (t == "BV") {
          c.binary = true;
          c.lo = 0.0;
          c.up = 1.0;
        } else throw fail(lineno, tok[0].second, "bad bound type '" + t + "'");
        break;
      }
      case Sec::Sos: {
        if (tok[0].first == "S1" || tok[0].first == "S2") {
          if (tok[0].first == "S2") throw fail(lineno, tok[0].second, "SOS2 not supported");
          std::string nm = tok.size() >= 3 ? tok[2].first : "S" + std::to_string(sos.size());
          sos.push_back({nm, {}});
          break;
        }
        if (sos.empty()) throw fail(lineno, tok[0].second, "SOS member before set header");
        std::string entry = tok[0].first;
        auto colon = entry.find(':');
        std::string c = colon == std::string::npos ? entry : entry.substr(0, colon);
        sos.back().members.push_back(col_of(c, tok[0].second));
        break;
      }
      case Sec::Name:
      case Sec::None:
      case Sec::End:
        throw fail(lineno, tok[0].second, "data outside a section");
    }
    if (end == text.size()) break;
  }
  if (!saw_end && !text.empty()) throw fail(lineno, 1, "missing ENDATA");

  m.set_name(name);
  for (const auto& c : cols) {
    if (c.binary || (c.integer && c.lo >= 0.0 && c.up <= 1.0)) {
      std::size_t j = m.add_binary(c.name);
      m.set_bounds(j, c.lo, c.up);
    } else if (c.integer) {
      throw Error(ErrorCode::Parse, "general integer column '" + c.name + "' not supported");
    } else {
      m.add_variable(c.name, c.lo, c.up);
    }
  }
  for (std::size_t i = 0; i < row_names.size(); ++i) {
    if (has_range[i]) throw Error(ErrorCode::Parse, "RANGES entries are not supported (row '" + row_names[i] + "')");
    m.add_constraint(row_names[i], row_terms[i], row_sense[i], row_rhs[i]);
  }
  std::vector<Term> ot;
  for (std::size_t j = 0; j < obj.size(); ++j)
    if (obj[j] != 0.0) ot.push_back({j, obj[j]});
  m.set_objective(sense, ot, obj_const);
  for (auto& s : sos) m.add_sos1(s.name, s.members);
  return m;
}

}  // namespace tsodso::milp
