#pragma once

#include "persona/types.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace persona {

// Fixed-schema CSV readers/writers for the pipeline artifacts. Column order
// and header names are part of the file contract; doubles are printed with
// "%.10g" so identical data always serializes byte-identically.

// static.csv: training-visible static columns (no true_segment).
void write_static_csv(const std::filesystem::path& path, const std::vector<CustomerStatic>& rows);
std::vector<CustomerStatic> read_static_csv(const std::filesystem::path& path);

// temporal.csv: training-visible behavioral columns + action labels +
// engagement outcomes (no true_intent).
void write_temporal_csv(const std::filesystem::path& path, const std::vector<CustomerMonth>& rows);
std::vector<CustomerMonth> read_temporal_csv(const std::filesystem::path& path);

// truth.csv: validation sidecar (customer_id, month_index, true_segment,
// true_intent). Static truth is repeated per month row for convenience.
void write_truth_csv(const std::filesystem::path& path, const std::vector<CustomerStatic>& statics,
                     const std::vector<CustomerMonth>& months);
struct TruthRow {
    int64_t customer_id;
    int month_index;
    int true_segment;
    IntentState true_intent;
};
std::vector<TruthRow> read_truth_csv(const std::filesystem::path& path);

// Low-level helpers shared by other writers.
std::string format_double(double v);
std::vector<std::vector<std::string>> read_csv_rows(const std::filesystem::path& path);

}  // namespace persona
