#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace covw {

struct CriterionReport {
    int id = 0;
    std::string name;
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
};

struct ValidationOptions {
    std::uint64_t seed = 20240601;
    // 0 uses every hardware thread
    unsigned threads = 0;
};

inline constexpr int kCriterionCount = 10;

std::string criterion_name(int id);

CriterionReport run_criterion(int id, const ValidationOptions& opt);

// Runs the listed criteria (all of them when `ids` is empty) in order.
std::vector<CriterionReport> run_validation(const ValidationOptions& opt, std::span<const int> ids = {});

// One "PASS|FAIL <id> <name>: <detail>" line per criterion. Timings are left
// out so that reports from the same seed compare equal.
void print_report(std::ostream& out, std::span<const CriterionReport> reports);

bool all_passed(std::span<const CriterionReport> reports);

} // namespace covw
