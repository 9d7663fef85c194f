// Copyright 2026 The ddbm Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef DDBM_CSV_H_
#define DDBM_CSV_H_

#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

namespace ddbm {

// Shortest representation that round-trips exactly.
std::string FormatDouble(double v);

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);

  void Row(const std::vector<std::string>& cells);
  std::string str() const { return out_.str(); }
  std::size_t rows() const { return rows_; }

 private:
  std::size_t columns_;
  std::size_t rows_ = 0;
  std::ostringstream out_;
};

}  // namespace ddbm

#endif  // DDBM_CSV_H_
