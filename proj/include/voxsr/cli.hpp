#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "voxsr/metrics.hpp"
#include "voxsr/model.hpp"
#include "voxsr/superres.hpp"
#include "voxsr/synthdata.hpp"
#include "voxsr/train.hpp"

namespace voxsr::cli {

/// Every parameter set a subcommand may read. `source` keeps the parsed file
/// so defaults that depend on the data apply only to keys the user left out.
struct RunConfig {
    SynthSpec synth;
    GeneratorConfig generator;
    DiscriminatorConfig discriminator;
    Hyperparams hyperparams;
    SuperresOptions superres;
    EvalSpec eval;
    nlohmann::json source = nlohmann::json::object();

    bool given(const char* section, const char* key) const;
};

RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& c);

/// Applies --seed to every section that has a seed.
void override_seed(RunConfig& c, std::uint64_t seed);

void cmd_synth(const RunConfig& cfg, const std::filesystem::path& out_dir);

struct TrainArgs {
    std::filesystem::path lr;
    std::filesystem::path hr_pool;
    std::optional<std::filesystem::path> resume;
};
TrainState cmd_train(const RunConfig& cfg, const TrainArgs& args, const std::filesystem::path& out_dir);

struct SuperresArgs {
    std::filesystem::path checkpoint;
    std::filesystem::path input;
};
SuperresResult cmd_superres(const RunConfig& cfg, const SuperresArgs& args, const std::filesystem::path& out_dir);

/// A dataset to evaluate: an SVOL volume, or an SVOL stack of 2D images.
struct EvalInput {
    std::string name;
    std::filesystem::path path;
    bool images = false;
    std::optional<int> patch_side;
};
/// Parses "name=path" or "name=path:side".
EvalInput parse_eval_input(const std::string& text, bool images);
std::vector<MetricReport> cmd_eval(const RunConfig& cfg, const std::vector<EvalInput>& inputs,
                                   const std::filesystem::path& out_dir);

/// Entry point behind the voxsr executable. Returns the process exit code:
/// 0 success, 2 configuration error, 3 data error, 4 numeric failure.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace voxsr::cli
