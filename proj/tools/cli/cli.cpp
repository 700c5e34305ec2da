// Copyright (c) moecache authors.
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <algorithm>
#include <ostream>

#include "commands.hpp"
#include "moecache/error.hpp"

namespace moecache::cli {

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Context ctx{out, err, {}};
  CLI::App app("Trace-driven expert cache simulator for mixture-of-experts inference", "moecache");
  app.require_subcommand(1);
  app.set_version_flag("--version", "moecache 0.1.0");
  add_gen_trace(app, ctx);
  add_simulate(app, ctx);
  add_speculate(app, ctx);
  add_metrics(app, ctx);
  add_cost(app, ctx);
  add_render(app, ctx);
  add_compare(app, ctx);
  add_sweep(app, ctx);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsageError;
  }

  try {
    ctx.action();
    return kOk;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const SelectionError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const FitError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    // I/O, malformed files, invalid records, numeric failures.
    err << "error: " << e.what() << '\n';
    return kDataError;
  }
}

}  // namespace moecache::cli
