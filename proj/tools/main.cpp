#include <cstdio>
#include <exception>

#include "commands.hpp"
#include "common.hpp"
#include "edarp/error.hpp"

using namespace edarp::cli;

int main(int argc, char** argv) {
  CLI::App app{"Electric dial-a-ride solvers, training and evaluation", "edarp"};
  app.set_version_flag("--version", tool_version());
  app.require_subcommand(1);

  Context ctx;
  ctx.argv.assign(argv, argv + argc);
  add_generate(app, ctx);
  add_solve(app, ctx);
  add_train(app, ctx);
  add_eval(app, ctx);
  add_report(app, ctx);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    ctx.run();
    return kExitOk;
  } catch (const edarp::UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kExitUsage;
  } catch (const edarp::DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const edarp::NumericalError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInternal;
  }
}
