// Command line front end. Subcommands are registered in cli.hpp; this
// translation unit only owns main() and top-level error handling.

#include <cstdio>
#include <exception>

#include "skmfc/cli.hpp"
#include "skmfc/errors.hpp"

int main(int argc, char** argv) {
    try {
        return skmfc::cli::run(argc, argv);
    } catch (const skmfc::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const skmfc::SolverError& e) {
        std::fprintf(stderr, "solver error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
