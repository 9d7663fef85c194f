// Copyright 2026 The ddbm Authors
// SPDX-License-Identifier: Apache-2.0

#include "ddbm/csv.h"

#include <charconv>

#include "ddbm/types.h"

namespace ddbm {

std::string FormatDouble(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

CsvWriter::CsvWriter(std::vector<std::string> header) : columns_(header.size()) {
  Row(header);
  rows_ = 0;
}

void CsvWriter::Row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_) throw ShapeError("csv: row width mismatch");
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i > 0) out_ << ',';
    out_ << cells[i];
  }
  out_ << '\n';
  ++rows_;
}

}  // namespace ddbm
