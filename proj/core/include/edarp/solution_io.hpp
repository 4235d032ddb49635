#pragma once

#include <string>
#include <string_view>

#include "edarp/environment.hpp"

namespace edarp {

inline constexpr std::string_view kSolutionSchema = "edarp-solution/1";

// `instance_ref` is the instance seed or content hash the solution belongs to.
std::string save_solution(const Solution& sol, const std::string& instance_ref);

struct LoadedSolution {
  std::string instance_ref;
  Solution solution;
};
LoadedSolution load_solution(std::string_view json);

void write_solution_file(const Solution& sol, const std::string& instance_ref,
                         const std::string& path);
LoadedSolution read_solution_file(const std::string& path);

}  // namespace edarp
