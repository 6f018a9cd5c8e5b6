// Command-line front end: wires JSON configs to the library harnesses.
// Exit codes: 0 success, 1 runtime failure (stage named on stderr),
// 2 malformed command line or config (location named on stderr).

#include <CLI11.hpp>
#include <prefopt/cli.hpp>

int main(int argc, char** argv) {
    CLI::App app{"desk-scale laboratory for distributionally robust preference optimization"};
    app.require_subcommand(1);

    prefopt::RunManifest manifest;
    std::string log_level = "info";

    const auto add_command = [&](const std::string& name, const std::string& desc) {
        CLI::App* sub = app.add_subcommand(name, desc);
        sub->add_option("--config", manifest.config_path, "JSON config file")
            ->required()
            ->check(CLI::ExistingFile);
        sub->add_option("--out", manifest.out_dir, "output directory")->required();
        sub->add_option("--log", log_level, "log level: quiet, info, debug");
        sub->callback([&, name]() { manifest.command = name; });
        return sub;
    };

    add_command("gen-data", "sample a preference dataset and its feature map");
    add_command("train", "fit a policy with projected gradient descent");
    add_command("eval-shift", "train under one preference mixture, evaluate across the grid");
    add_command("rate-exp", "estimation-error rates across sample sizes");
    add_command("dist-sim", "simulate data-parallel tilt-kernel computation");
    add_command("verify", "run the oracle and invariant checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "command line error: " << e.what() << "\n";
        return 2;
    }

    try {
        manifest.log_level = prefopt::log_level_from_name(log_level);
    } catch (const std::exception& e) {
        std::cerr << "command line error: " << e.what() << "\n";
        return 2;
    }
    return prefopt::execute(manifest);
}
