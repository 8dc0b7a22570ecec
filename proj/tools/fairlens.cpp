/*
 * Copyright 2026 The FairLens Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "fairlens/commands.hpp"
#include "fairlens/config.hpp"
#include "fairlens/error.hpp"

namespace {

using fairlens::ConfigError;

// "1,2,5" or "1..20" (inclusive), or a mix: "1..3,10".
std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  for (const auto& item : fairlens::config::detail::split(text, ',')) {
    const auto dots = item.find("..");
    if (dots == std::string::npos) {
      seeds.push_back(fairlens::config::detail::parse_number<std::uint64_t>(item, "--seeds"));
      continue;
    }
    const auto lo = fairlens::config::detail::parse_number<std::uint64_t>(item.substr(0, dots), "--seeds");
    const auto hi = fairlens::config::detail::parse_number<std::uint64_t>(item.substr(dots + 2), "--seeds");
    if (hi < lo) throw ConfigError("--seeds: empty range '" + item + "'");
    for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
  }
  if (seeds.empty()) throw ConfigError("--seeds is empty");
  return seeds;
}

std::optional<std::vector<std::string>> parse_metrics(const std::string& text) {
  if (text.empty()) return std::nullopt;
  return fairlens::config::detail::split(text, ',');
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fairlens: representation-level bias assessment"};
  app.require_subcommand(1);

  fairlens::commands::AssessRequest assess;
  std::string assess_metrics;
  std::optional<std::uint64_t> assess_seed;
  std::optional<std::string> assess_config;
  auto* cmd_assess = app.add_subcommand("assess", "compute bias metrics for a representation set");
  cmd_assess->add_option("--representations", assess.representations, "matrix file (text or binary)")->required();
  cmd_assess->add_option("--attributes", assess.attributes, "attribute label file")->required();
  cmd_assess->add_option("--metrics", assess_metrics, "comma list of rlb,mi,entropy,dcor2,probe,ba,cohort");
  cmd_assess->add_option("--config", assess_config, "run config file");
  cmd_assess->add_option("--seed", assess_seed, "estimator seed");
  cmd_assess->add_option("--out", assess.out, "report path (JSON)")->required();

  fairlens::commands::GenerateRequest generate;
  std::optional<std::uint64_t> generate_seed;
  auto* cmd_generate = app.add_subcommand("generate", "write a synthetic dataset from a [spec] config");
  cmd_generate->add_option("--spec", generate.spec, "config file with a [spec] section")->required();
  cmd_generate->add_option("--seed", generate_seed, "overrides spec.seed");
  cmd_generate->add_option("--out", generate.out_prefix, "output prefix")->required();

  fairlens::commands::PerturbRequest perturb;
  auto* cmd_perturb = app.add_subcommand("perturb", "apply a spurious perturbation (R_S, R_G, Z_S, Z_G)");
  cmd_perturb->add_option("--representations", perturb.representations)->required();
  cmd_perturb->add_option("--attributes", perturb.attributes)->required();
  cmd_perturb->add_option("--mode", perturb.mode, "R_S, R_G, Z_S or Z_G")->required();
  cmd_perturb->add_option("--seed", perturb.seed);
  cmd_perturb->add_option("--out", perturb.out_prefix, "output prefix")->required();

  std::vector<std::string> compare_specs, compare_reps, compare_attrs;
  std::string compare_metrics, compare_seeds;
  std::optional<std::string> compare_config;
  std::string compare_out;
  auto* cmd_compare = app.add_subcommand("compare", "multi-dataset, multi-seed metric table");
  cmd_compare->add_option("--spec", compare_specs, "dataset spec config (repeatable)");
  cmd_compare->add_option("--representations", compare_reps, "matrix file (repeatable)");
  cmd_compare->add_option("--attributes", compare_attrs, "attribute file, paired with --representations");
  cmd_compare->add_option("--metrics", compare_metrics, "comma list of rlb,mi,entropy,dcor2,probe");
  cmd_compare->add_option("--seeds", compare_seeds, "e.g. 1..20 or 1,2,3")->required();
  cmd_compare->add_option("--config", compare_config, "run config file");
  cmd_compare->add_option("--out", compare_out, "CSV path; reports go to <out>.runs/")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*cmd_assess) {
      assess.metrics = parse_metrics(assess_metrics);
      assess.seed = assess_seed;
      assess.config = assess_config;
      fairlens::commands::assess(assess);
      std::cout << "wrote " << assess.out << "\n";
    } else if (*cmd_generate) {
      generate.seed = generate_seed;
      const auto files = fairlens::commands::generate(generate);
      std::cout << "wrote " << files.representations << ", " << files.attributes << ", " << files.sidecar << "\n";
    } else if (*cmd_perturb) {
      const auto files = fairlens::commands::perturb(perturb);
      std::cout << "wrote " << files.representations << ", " << files.attributes << ", " << files.sidecar << "\n";
    } else if (*cmd_compare) {
      fairlens::commands::CompareRequest req;
      for (const auto& s : compare_specs) {
        req.datasets.push_back({std::filesystem::path(s).stem().string(), s, std::nullopt, std::nullopt});
      }
      if (compare_reps.size() != compare_attrs.size()) {
        throw ConfigError("--representations and --attributes must be given the same number of times");
      }
      for (std::size_t i = 0; i < compare_reps.size(); ++i) {
        req.datasets.push_back(
            {std::filesystem::path(compare_reps[i]).stem().string(), std::nullopt, compare_reps[i], compare_attrs[i]});
      }
      req.metrics = parse_metrics(compare_metrics);
      req.seeds = parse_seeds(compare_seeds);
      req.config = compare_config;
      req.out = compare_out;
      const auto result = fairlens::commands::compare(req);
      std::cout << "wrote " << req.out << " (" << result.reports.size() << " reports, " << result.failures
                << " failed runs)\n";
      if (result.failures > 0) return result.exit_code > 0 ? result.exit_code : 4;
    }
  } catch (const fairlens::mine::TrainingDivergedError& e) {
    std::cerr << "error: " << e.what() << " (" << e.trace().iterations() << " iterations traced)\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return fairlens::commands::exit_code_for(e);
  }
  return 0;
}
