#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "mfpg/errors.hpp"

namespace mfpg {

// Comma-separated output, '.' decimal, LF endings. All formatting goes
// through snprintf so bytes are reproducible across runs and thread counts.
class CsvWriter {
  public:
    explicit CsvWriter(const std::string& path) : out_(path, std::ios::binary) {
        require(out_.good(), ErrorKind::IoError, "cannot open " + path);
        path_ = path;
    }

    void header(const std::vector<std::string>& cols) {
        for (std::size_t i = 0; i < cols.size(); ++i) {
            if (i) out_ << ',';
            out_ << cols[i];
        }
        out_ << '\n';
    }

    CsvWriter& cell(const std::string& s) {
        sep();
        out_ << s;
        return *this;
    }
    CsvWriter& cell(std::size_t v) {
        sep();
        out_ << v;
        return *this;
    }
    CsvWriter& cell(long long v) {
        sep();
        out_ << v;
        return *this;
    }
    // fixed-point, 6 decimals: value-like columns
    CsvWriter& fixed(double v) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.6f", v);
        return cell(std::string(buf));
    }
    // scientific, 9 significant digits: error/diagnostic columns
    CsvWriter& sci(double v) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.9e", v);
        return cell(std::string(buf));
    }
    void endrow() {
        out_ << '\n';
        first_ = true;
        require(out_.good(), ErrorKind::IoError, "write failure on " + path_);
    }

  private:
    void sep() {
        if (!first_) out_ << ',';
        first_ = false;
    }
    std::ofstream out_;
    std::string path_;
    bool first_ = true;
};

} // namespace mfpg
