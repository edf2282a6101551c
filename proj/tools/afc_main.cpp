#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "afc/analysis.hpp"
#include "afc/errors.hpp"
#include "afc/orchestrator.hpp"

namespace {

afc::RunConfig load_config(const std::string& path, const std::vector<std::string>& sets) {
    return afc::parse_run_config(path, sets);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"deep-RL active flow control: baseline, training, evaluation, analysis"};
    app.require_subcommand(1);

    std::string config_path, checkpoint, input_dir;
    std::vector<std::string> sets;
    bool zero = false;
    double window = 0.0;

    auto add_config = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "run configuration file")->required();
        cmd->add_option("--set", sets, "override, key=value (repeatable)");
    };

    CLI::App* baseline = app.add_subcommand(
        "baseline", "settle the unactuated flow; write snapshot and statistics");
    add_config(baseline);

    CLI::App* train = app.add_subcommand("train", "run the PPO training loop");
    add_config(train);

    CLI::App* evaluate =
        app.add_subcommand("evaluate", "roll out the deterministic policy");
    add_config(evaluate);
    evaluate->add_option("--checkpoint", checkpoint, "policy checkpoint to load")
        ->required();
    evaluate->add_flag("--zero", zero, "force U_jet = 0 (ignore the checkpoint)");

    CLI::App* analyze =
        app.add_subcommand("analyze", "post-process a run directory into summary.json");
    analyze->add_option("--input", input_dir, "directory holding forces.csv")->required();
    analyze->add_option("--window", window, "averaging window, 0 = half the record");

    CLI11_PARSE(app, argc, argv);

    try {
        if (baseline->parsed()) {
            afc::run_baseline(load_config(config_path, sets));
        } else if (train->parsed()) {
            afc::Orchestrator orch(load_config(config_path, sets));
            orch.train();
        } else if (evaluate->parsed()) {
            afc::Orchestrator orch(load_config(config_path, sets));
            const afc::EvalResult r = orch.evaluate(checkpoint, zero);
            std::printf("C_l=%+.4f C_d=%.4f C_l_rms=%.4f E=%.4f St=%.4f  "
                        "reward=%.5f (local %.5f)\n",
                        r.summary.C_l_mean, r.summary.C_d_mean, r.summary.C_l_rms,
                        r.summary.E, r.strouhal, r.mean_reward, r.mean_local_reward);
        } else if (analyze->parsed()) {
            afc::analyze_run(input_dir, window);
            std::printf("wrote %s/summary.json\n", input_dir.c_str());
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
