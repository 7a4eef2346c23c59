#pragma once

#include <string>

#include "zee/types.hpp"

namespace zee {

// Column mapping for survival CSV files. Covariates are read from columns
// <covariate_prefix>1..<covariate_prefix>p and auxiliaries from
// <auxiliary_prefix>1..<auxiliary_prefix>q, discovered from the header.
// `selected` and `prob` columns may be absent, in which case every record is
// treated as selected with probability one (random-sampling data).
struct CsvSchema {
  std::string time = "time";
  std::string event = "event";
  std::string selected = "selected";
  std::string prob = "prob";
  std::string covariate_prefix = "z";
  std::string auxiliary_prefix = "vtilde";
};

// Reads and validates a dataset. Blank covariate fields are accepted only on
// unselected rows (design-based missingness); any other blank field is an
// error. Throws zee::Error with the offending condition.
Dataset load_csv(const std::string& path, const CsvSchema& schema, double tau,
                 double sigma = 1e-6);

inline Dataset load_csv(const std::string& path, double tau,
                        double sigma = 1e-6) {
  return load_csv(path, CsvSchema{}, tau, sigma);
}

// Writes the dataset with 17 significant digits so that load_csv(write_csv(d))
// reproduces d exactly. Missing covariates become blank fields.
void write_csv(const Dataset& dataset, const std::string& path,
               const CsvSchema& schema = CsvSchema{});

}  // namespace zee
