#pragma once

#include <functional>
#include <string>
#include <vector>

#include "CLI11.hpp"

namespace edarp::cli {

struct Context {
  std::vector<std::string> argv;
  std::function<void()> run;  // set by the selected subcommand
};

void add_generate(CLI::App& app, Context& ctx);
void add_solve(CLI::App& app, Context& ctx);
void add_train(CLI::App& app, Context& ctx);
void add_eval(CLI::App& app, Context& ctx);
void add_report(CLI::App& app, Context& ctx);

}  // namespace edarp::cli
