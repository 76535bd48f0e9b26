#pragma once

#include "affine/model.hpp"

#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace affine {

// Schema or syntax problem in a config document.  line/column are 1-based and
// set only for syntax errors; 0 means not applicable.
class ConfigError : public std::runtime_error {
  public:
    explicit ConfigError(const std::string& message, int line = 0, int column = 0)
        : std::runtime_error(message), line_(line), column_(column) {}
    int line() const noexcept { return line_; }
    int column() const noexcept { return column_; }

  private:
    int line_;
    int column_;
};

struct ModelConfig {
    AffineModelD model;
    PricingKernelSpecD pk;
    VecD x0;             // size 0 when the document does not pin a start state
    std::string preset;  // provenance only; empty for explicit documents
};

// Parses a JSON document: either {"preset": name, "params": {...}, "x0": [...]}
// or an explicit {"model": {...}, "kernel": {...}, "x0": [...]}.  Dimension
// checks run at parse time.
ModelConfig parse_config(const std::string& text);

// Builds a named preset with default parameters.
ModelConfig preset_config(const std::string& name);

// Emits the fully resolved document (presets expanded); parsing it back yields
// the same model bit for bit.
std::string serialize(const ModelConfig& cfg);

// 16-hex-digit FNV-1a of the resolved document; stable across runs.
std::string config_hash(const ModelConfig& cfg);

// 17 significant digits: every double round-trips exactly through the CSV.
std::string csv_number(double x);

void write_csv(std::ostream& os, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

}  // namespace affine
