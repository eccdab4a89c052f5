#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "ssqp/eval.hpp"

namespace ssqp::cli {

struct ManifestRow {
  std::string content_id;
  std::filesystem::path ref_path;   // resolved against the manifest directory
  std::filesystem::path test_path;
  std::optional<double> mos;
  std::map<std::string, std::string> tags;
};

// CSV with columns content_id, ref_path, test_path and optional mos, tags
// (tags as semicolon-separated key=value).
std::vector<ManifestRow> read_manifest(const std::filesystem::path& path);

// Loads every pair; failures name the 1-based manifest row.
std::vector<LabeledPair> load_pairs(const std::vector<ManifestRow>& rows, bool require_mos, int jobs);

// Entry point shared by the executable and the tests. Returns the exit code:
// 0 success, 1 runtime error, 2 usage error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ssqp::cli
