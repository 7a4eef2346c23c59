#include "zee/csv.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

namespace zee {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_real(const std::string& field, const std::string& what, int row) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(field, &pos);
    if (pos != field.size())
      fail(ErrorCode::MissingValue, "row " + std::to_string(row) +
                                        ": cannot parse " + what + " value '" +
                                        field + "'");
    return v;
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    fail(ErrorCode::MissingValue, "row " + std::to_string(row) +
                                      ": cannot parse " + what + " value '" +
                                      field + "'");
  }
}

int parse_indicator(const std::string& field, const std::string& what,
                    int row) {
  const double v = parse_real(field, what, row);
  if (v == 0.0) return 0;
  if (v == 1.0) return 1;
  fail(ErrorCode::NonBinaryIndicator,
       "row " + std::to_string(row) + ": " + what + " must be 0 or 1");
}

// indices of columns named <prefix>1, <prefix>2, ... in order
std::vector<int> prefixed_columns(const std::vector<std::string>& header,
                                  const std::string& prefix) {
  std::vector<int> cols;
  for (int k = 1;; ++k) {
    const std::string name = prefix + std::to_string(k);
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) break;
    cols.push_back(static_cast<int>(it - header.begin()));
  }
  return cols;
}

int find_column(const std::vector<std::string>& header, const std::string& name) {
  auto it = std::find(header.begin(), header.end(), name);
  return it == header.end() ? -1 : static_cast<int>(it - header.begin());
}

}  // namespace

Dataset load_csv(const std::string& path, const CsvSchema& schema, double tau,
                 double sigma) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::MissingColumn, "cannot open file '" + path + "'");

  std::string line;
  if (!std::getline(in, line))
    fail(ErrorCode::MissingColumn, "file '" + path + "' is empty");
  // tolerate a UTF-8 byte order mark
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0)
    line = line.substr(3);
  const auto header = split_line(line);

  const int ct = find_column(header, schema.time);
  const int ce = find_column(header, schema.event);
  if (ct < 0) fail(ErrorCode::MissingColumn, "missing column '" + schema.time + "'");
  if (ce < 0) fail(ErrorCode::MissingColumn, "missing column '" + schema.event + "'");
  const int cs = find_column(header, schema.selected);
  const int cp = find_column(header, schema.prob);
  const auto zcols = prefixed_columns(header, schema.covariate_prefix);
  const auto vcols = prefixed_columns(header, schema.auxiliary_prefix);

  std::vector<SubjectRecord> records;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto fields = split_line(line);
    if (fields.size() != header.size())
      fail(ErrorCode::MissingValue,
           "row " + std::to_string(row) + ": wrong number of fields");

    SubjectRecord r;
    r.time = parse_real(fields[ct], "time", row);
    r.event = parse_indicator(fields[ce], "event", row);
    r.selected = cs >= 0 ? parse_indicator(fields[cs], "selected", row) : 1;
    if (cp >= 0) {
      const double prob = parse_real(fields[cp], "prob", row);
      if (!(prob > 0.0) || prob > 1.0)
        fail(ErrorCode::ProbabilityOutOfRange,
             "row " + std::to_string(row) +
                 ": sampling probability must lie in (0, 1]");
      r.sampling_prob = prob;
    } else {
      r.sampling_prob = 1.0;
    }

    bool any_blank = false, all_blank = true;
    Vector z(static_cast<int>(zcols.size()));
    for (std::size_t k = 0; k < zcols.size(); ++k) {
      const std::string& f = fields[zcols[k]];
      if (f.empty()) {
        any_blank = true;
      } else {
        all_blank = false;
        z[static_cast<int>(k)] = parse_real(f, "covariate", row);
      }
    }
    if (any_blank) {
      if (r.selected == 1)
        fail(ErrorCode::MissingValue,
             "row " + std::to_string(row) +
                 ": selected row with blank covariates");
      if (!all_blank)
        fail(ErrorCode::MissingValue,
             "row " + std::to_string(row) +
                 ": covariates must be all present or all blank");
      r.covariates.reset();
    } else {
      r.covariates = std::move(z);
    }

    Vector vt(static_cast<int>(vcols.size()));
    for (std::size_t k = 0; k < vcols.size(); ++k) {
      const std::string& f = fields[vcols[k]];
      if (f.empty())
        fail(ErrorCode::MissingValue,
             "row " + std::to_string(row) + ": blank auxiliary value");
      vt[static_cast<int>(k)] = parse_real(f, "auxiliary", row);
    }
    r.auxiliary = std::move(vt);

    records.push_back(std::move(r));
  }

  return Dataset(std::move(records), tau, sigma);
}

void write_csv(const Dataset& dataset, const std::string& path,
               const CsvSchema& schema) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::ConfigError, "cannot write file '" + path + "'");

  const int p = dataset.covariate_dim();
  const int q = dataset.auxiliary_dim();
  out << schema.time << ',' << schema.event << ',' << schema.selected << ','
      << schema.prob;
  for (int k = 1; k <= p; ++k) out << ',' << schema.covariate_prefix << k;
  for (int k = 1; k <= q; ++k) out << ',' << schema.auxiliary_prefix << k;
  out << '\n';

  char buf[64];
  auto fmt = [&buf](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };

  for (const auto& r : dataset.records()) {
    out << fmt(r.time) << ',' << r.event << ',' << r.selected << ','
        << fmt(r.sampling_prob);
    for (int k = 0; k < p; ++k) {
      out << ',';
      if (r.covariates.has_value()) out << fmt((*r.covariates)[k]);
    }
    for (int k = 0; k < q; ++k) out << ',' << fmt(r.auxiliary[k]);
    out << '\n';
  }
}

}  // namespace zee
