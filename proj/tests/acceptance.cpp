#include "covw/errors.hpp"
#include "covw/validate.hpp"

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

// Usage: acceptance [criterion ids...]
int main(int argc, char** argv) {
    std::vector<int> ids;
    for (int i = 1; i < argc; ++i) ids.push_back(std::atoi(argv[i]));
    try {
        covw::ValidationOptions opt;
        std::vector<covw::CriterionReport> reports;
        const auto run = [&](int id) {
            reports.push_back(covw::run_criterion(id, opt));
            covw::print_report(std::cout, std::span(&reports.back(), 1));
            std::fprintf(stderr, "  criterion %d took %.1f s\n", id, reports.back().seconds);
            std::cout.flush();
        };
        if (ids.empty()) {
            for (int id = 1; id <= covw::kCriterionCount; ++id) run(id);
        } else {
            for (int id : ids) run(id);
        }
        return covw::all_passed(reports) ? 0 : 1;
    } catch (const covw::ArgumentError& e) {
        std::cerr << e.what() << '\n';
        return 2;
    }
}
