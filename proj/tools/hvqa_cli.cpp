// hvqa: taxonomy validation, instance generation, protocol runs, scoring,
// toy distillation and multi-seed reports.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hvqa/backends.hpp"
#include "hvqa/common.hpp"
#include "hvqa/config.hpp"
#include "hvqa/harness.hpp"
#include "hvqa/instances.hpp"
#include "hvqa/metrics.hpp"
#include "hvqa/report.hpp"
#include "hvqa/sekd/distill.hpp"
#include "hvqa/sekd/experiment.hpp"
#include "hvqa/sekd/param_io.hpp"
#include "hvqa/taxonomy.hpp"
#include "json.hpp"

using json = nlohmann::json;
using namespace hvqa;

namespace {

int code(ExitCode c) { return static_cast<int>(c); }

struct DecodeFlags {
    int max_new_tokens = 1;
    bool sample = false;
    double temperature = 1.0;
    double top_p = 1.0;

    void attach(CLI::App* cmd) {
        cmd->add_option("--max-new-tokens", max_new_tokens, "Token budget per call (joint runs raise it to 2L)");
        cmd->add_flag("--sample", sample, "Sample instead of greedy decoding");
        cmd->add_option("--temperature", temperature, "Sampling temperature");
        cmd->add_option("--top-p", top_p, "Nucleus sampling mass");
    }
    DecodeConfig get() const {
        DecodeConfig d{max_new_tokens, !sample, temperature, top_p};
        d.validate();
        return d;
    }
};

json decode_json(const DecodeConfig& d) {
    return {{"max_new_tokens", d.max_new_tokens}, {"greedy", d.greedy}, {"temperature", d.temperature}, {"top_p", d.top_p}};
}

// Backend config with the run seed filled in where the file leaves it open.
json backend_json(const std::string& path, std::uint64_t seed) {
    json b = load_config_file(path);
    if (!b.is_object()) throw ConfigError("backend config must be a JSON object");
    if (b.value("type", "") == "mock_conditional" && !b.contains("seed")) b["seed"] = seed;
    return b;
}

// ---- validate ----

int cmd_validate(const std::string& taxonomy_path) {
    try {
        const TaxonomyTree tree = load_taxonomy_file(taxonomy_path);
        std::size_t leaves = tree.leaves().size();
        std::cout << "ok: " << tree.name() << ": " << tree.size() << " nodes, " << leaves << " leaves, depth "
                  << tree.max_depth() << "\n";
        return code(ExitCode::kOk);
    } catch (const TaxonomyError& e) {
        std::cerr << "invalid taxonomy (" << to_string(e.kind()) << ")";
        if (!e.node_id().empty()) std::cerr << " at node '" << e.node_id() << "'";
        std::cerr << ": " << e.what() << "\n";
        return code(ExitCode::kValidation);
    }
}

// ---- generate ----

struct GenerateArgs {
    std::string taxonomy;
    std::size_t n = 100;
    std::string sampler = "sibling";
    std::string weights;
    std::uint64_t seed = 42;
    std::string out;
    std::string manifest;
    bool skip_singleton = false;
};

int cmd_generate(const GenerateArgs& a) {
    const TaxonomyTree tree = load_taxonomy_file(a.taxonomy);
    DistractorSampler sampler;
    sampler.policy = sampler_policy_from_string(a.sampler);
    if (sampler.policy == SamplerPolicy::kWeighted) {
        if (a.weights.empty()) throw ConfigError("--sampler weighted needs --weights FILE");
        sampler = DistractorSampler::from_weights_json(read_text_file(a.weights));
    }
    const auto instances = generate_instances(tree, a.n, sampler, a.seed, !a.skip_singleton);
    write_text_file(a.out, write_instances(instances));

    std::vector<std::string> ids;
    for (const auto& inst : instances) ids.push_back(inst.instance_id);
    const SplitManifest split = split_ids(ids, a.seed);
    json manifest;
    manifest["config"] = {{"taxonomy", a.taxonomy}, {"n", a.n},       {"sampler", a.sampler},
                          {"weights", a.weights},   {"seed", a.seed}, {"skip_singleton", a.skip_singleton},
                          {"instances", a.out},     {"ratio", {6, 2, 2}}};
    manifest["counts"] = {{"train", split.train.size()}, {"val", split.val.size()}, {"test", split.test.size()}};
    manifest["train"] = split.train;
    manifest["val"] = split.val;
    manifest["test"] = split.test;
    const std::string manifest_path = a.manifest.empty() ? a.out + ".split.json" : a.manifest;
    write_text_file(manifest_path, manifest.dump(2) + "\n");
    std::cout << "wrote " << instances.size() << " instances to " << a.out << " (train " << split.train.size()
              << ", val " << split.val.size() << ", test " << split.test.size() << ")\n";
    return code(ExitCode::kOk);
}

// ---- run ----

struct RunArgs {
    std::string protocol;
    std::string instances;
    std::string backend;
    std::uint64_t seed = 42;
    std::string out;
    int concurrency = 4;
    bool gold_forcing = false;
    bool case_fold = false;
    DecodeFlags decode;
};

std::size_t error_count(const RunLog& log) {
    std::size_t n = 0;
    for (const auto& r : log.records) n += r.errors.size();
    return n;
}

RunLog execute_run(Protocol protocol, const std::vector<VqaInstance>& instances, BackendHandle& handle,
                   const json& resolved, const RunArgs& a) {
    HarnessOptions opts;
    opts.concurrency = a.concurrency;
    opts.gold_teacher_forcing = a.gold_forcing;
    opts.seed = a.seed;
    opts.parse.case_fold = a.case_fold;
    opts.config = resolved.dump();
    return run_protocol(protocol, instances, handle.get(), a.decode.get(), opts);
}

int cmd_run(const RunArgs& a) {
    const Protocol protocol = protocol_from_string(a.protocol);
    const auto instances = read_instances_file(a.instances);
    const json backend = backend_json(a.backend, a.seed);
    const DecodeConfig decode = a.decode.get();
    json resolved = {{"command", "run"},          {"protocol", a.protocol},   {"instances", a.instances},
                     {"backend", backend},         {"decode", decode_json(decode)}, {"seed", a.seed},
                     {"concurrency", a.concurrency}, {"gold_teacher_forcing", a.gold_forcing},
                     {"case_fold", a.case_fold}};
    BackendHandle handle = make_backend(backend, instances);
    const RunLog log = execute_run(protocol, instances, handle, resolved, a);
    write_text_file(a.out, run_log_to_jsonl(log));
    if (handle.recorder) write_text_file(handle.record_path, handle.recorder->to_jsonl());
    const std::size_t errors = error_count(log);
    std::cout << "run " << log.run_id << ": " << log.records.size() << " records, " << log.calls << " calls";
    if (errors > 0) {
        std::cout << ", " << errors << " backend failures\n";
        return code(ExitCode::kBackend);
    }
    std::cout << "\n";
    return code(ExitCode::kOk);
}

// ---- score ----

struct ScoreArgs {
    std::string run;
    std::string out;
    std::string depth_out;
    bool exclude_singleton = false;
};

int cmd_score(const ScoreArgs& a) {
    const RunLog log = run_log_from_jsonl(read_text_file(a.run));
    ReportOptions opts;
    opts.exclude_singleton_levels = a.exclude_singleton;
    const MetricReport rep = compute_report(log.records, opts);
    const bool as_json = std::filesystem::path(a.out).extension() == ".json";
    write_text_file(a.out, as_json ? report_json(rep) + "\n" : report_csv(rep));
    const std::string depth_path = a.depth_out.empty() ? a.out + ".depth.csv" : a.depth_out;
    write_text_file(depth_path, depth_csv(rep));
    std::cout << "hca " << format_double(rep.hca) << "  leaf_acc " << format_double(rep.leaf_acc) << "  por "
              << format_double(rep.por) << "  s_por " << format_double(rep.s_por) << "  tor "
              << format_double(rep.tor) << "  (n=" << rep.n_samples << ")\n";
    return code(ExitCode::kOk);
}

// ---- compare ----

struct CompareArgs {
    RunArgs run;
    std::string runs_dir;
    bool prefix = false;
};

int cmd_compare(CompareArgs a) {
    const auto instances = read_instances_file(a.run.instances);
    const json backend = backend_json(a.run.backend, a.run.seed);
    const DecodeConfig decode = a.run.decode.get();
    std::vector<CompareRow> rows;
    std::size_t errors = 0;
    for (Protocol p : {Protocol::kJoint, Protocol::kIndependent, Protocol::kConditioned}) {
        json resolved = {{"command", "compare"},
                         {"protocol", to_string(p)},
                         {"instances", a.run.instances},
                         {"backend", backend},
                         {"decode", decode_json(decode)},
                         {"seed", a.run.seed},
                         {"concurrency", a.run.concurrency},
                         {"gold_teacher_forcing", a.run.gold_forcing},
                         {"case_fold", a.run.case_fold}};
        BackendHandle handle = make_backend(backend, instances);
        const RunLog log = execute_run(p, instances, handle, resolved, a.run);
        errors += error_count(log);
        if (!a.runs_dir.empty()) {
            std::filesystem::create_directories(a.runs_dir);
            write_text_file(std::filesystem::path(a.runs_dir) / (std::string(to_string(p)) + ".jsonl"),
                            run_log_to_jsonl(log));
        }
        rows.push_back(compare_row(std::string(to_string(p)), compute_report(log.records), a.prefix));
    }
    write_text_file(a.run.out, compare_csv(rows));
    std::cout << compare_text(rows);
    return code(errors > 0 ? ExitCode::kBackend : ExitCode::kOk);
}

// ---- distill ----

struct DistillArgs {
    std::string config;
    std::uint64_t seed = 42;
    std::string out;
    std::string curve;
    std::string base_out;
    bool print_default = false;
};

int cmd_distill(const DistillArgs& a) {
    using namespace hvqa::sekd;
    if (a.print_default) {
        std::cout << experiment_to_json(ExperimentConfig{}).dump(2) << "\n";
        return code(ExitCode::kOk);
    }
    if (a.out.empty()) throw ConfigError("distill: --out is required");
    ExperimentConfig cfg = a.config.empty() ? ExperimentConfig{} : experiment_from_json(load_config_file(a.config));
    cfg.distill.seed = a.seed;

    const SyntheticWorld world(cfg.world);
    const Params base = pretrain_base(world, cfg.pretrain);
    const Split split = make_split(world, cfg.distill.train_size, cfg.distill.val_size, cfg.distill.seed);
    const DistillResult result = distill(world, base, base, cfg.distill, split);

    json meta = experiment_to_json(cfg);
    meta["run_seed"] = a.seed;
    meta["summary"] = {{"teacher_conditioned_hca", result.teacher_val_hca},
                       {"base_joint_hca", result.base_val_hca},
                       {"student_joint_hca", result.curve.back().val_hca}};
    write_text_file(a.out, serialize_params(result.student, result.projector, meta.dump()));
    if (!a.base_out.empty()) {
        json base_meta = experiment_to_json(cfg);
        base_meta["role"] = "base";
        write_text_file(a.base_out, serialize_params(base, Projector<double>{}, base_meta.dump()));
    }
    if (!a.curve.empty()) write_text_file(a.curve, curve_csv(result.curve));
    std::cout << "teacher conditioned HCA " << format_double(result.teacher_val_hca) << ", base joint HCA "
              << format_double(result.base_val_hca) << ", student joint HCA "
              << format_double(result.curve.back().val_hca) << "\n";
    return code(ExitCode::kOk);
}

// ---- report ----

struct ReportArgs {
    std::vector<std::string> runs;
    std::string out;
};

int cmd_report(const ReportArgs& a) {
    std::vector<MetricReport> reports;
    for (const auto& path : a.runs) reports.push_back(compute_report(run_log_from_jsonl(read_text_file(path)).records));
    const auto summary = summarize_reports(reports);
    const std::string csv = summary_csv(summary);
    if (a.out.empty()) {
        std::cout << csv;
    } else {
        write_text_file(a.out, csv);
        for (const auto& s : summary) {
            std::printf("%-13s %8.4f +- %.4f (n=%zu)\n", s.metric.c_str(), s.mean, s.std, s.n);
        }
    }
    return code(ExitCode::kOk);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hierarchical VQA evaluation and stepwise-to-joint distillation toolkit"};
    app.require_subcommand(1);

    std::string taxonomy_path;
    auto* validate = app.add_subcommand("validate", "Check a taxonomy file; exit 0 iff valid");
    validate->add_option("taxonomy", taxonomy_path, "Taxonomy JSON file")->required();

    GenerateArgs gen;
    auto* generate = app.add_subcommand("generate", "Build multiple-choice instances and a 6:2:2 split manifest");
    generate->add_option("--taxonomy", gen.taxonomy, "Taxonomy JSON file")->required();
    generate->add_option("-n,--n", gen.n, "Number of instances");
    generate->add_option("--sampler", gen.sampler, "Distractor policy: uniform|sibling|weighted");
    generate->add_option("--weights", gen.weights, "Confusion weights JSON for the weighted sampler");
    generate->add_option("--seed", gen.seed, "Random seed");
    generate->add_option("--out", gen.out, "Instance file (JSONL)")->required();
    generate->add_option("--manifest", gen.manifest, "Split manifest path (default: <out>.split.json)");
    generate->add_flag("--skip-singleton", gen.skip_singleton, "Ask no question at levels holding one node");

    RunArgs run;
    auto* run_cmd = app.add_subcommand("run", "Run one protocol over an instance file");
    run_cmd->add_option("--protocol", run.protocol, "joint|independent|conditioned")->required();
    run_cmd->add_option("--instances", run.instances, "Instance file")->required();
    run_cmd->add_option("--backend", run.backend, "Backend config JSON")->required();
    run_cmd->add_option("--seed", run.seed, "Run seed (also seeds mock backends without one)");
    run_cmd->add_option("--out", run.out, "Run log (JSONL)")->required();
    run_cmd->add_option("--concurrency", run.concurrency, "Instances processed in parallel");
    run_cmd->add_flag("--gold-forcing", run.gold_forcing, "Ablation: feed gold labels as known facts");
    run_cmd->add_flag("--case-fold", run.case_fold, "Accept lowercase answer letters");
    run.decode.attach(run_cmd);

    ScoreArgs score;
    auto* score_cmd = app.add_subcommand("score", "Compute path metrics for a run log");
    score_cmd->add_option("--run", score.run, "Run log")->required();
    score_cmd->add_option("--out", score.out, "Report (.csv or .json)")->required();
    score_cmd->add_option("--depth-out", score.depth_out, "Depth-wise CSV (default: <out>.depth.csv)");
    score_cmd->add_flag("--exclude-singleton", score.exclude_singleton, "Drop single-option levels from the depth table");

    CompareArgs cmp;
    auto* compare = app.add_subcommand("compare", "Run all three protocols and tabulate them against Joint");
    compare->add_option("--instances", cmp.run.instances, "Instance file")->required();
    compare->add_option("--backend", cmp.run.backend, "Backend config JSON")->required();
    compare->add_option("--seed", cmp.run.seed, "Run seed");
    compare->add_option("--out", cmp.run.out, "Comparison CSV")->required();
    compare->add_option("--runs-dir", cmp.runs_dir, "Also keep each protocol's run log here");
    compare->add_option("--concurrency", cmp.run.concurrency, "Instances processed in parallel");
    compare->add_flag("--prefix", cmp.prefix, "Report S-POR as the longest correct prefix");
    compare->add_flag("--case-fold", cmp.run.case_fold, "Accept lowercase answer letters");
    cmp.run.decode.attach(compare);

    DistillArgs dist;
    auto* distill_cmd = app.add_subcommand("distill", "Pretrain the toy scorer and distil stepwise into joint");
    distill_cmd->add_option("--config", dist.config, "Experiment config JSON (defaults if omitted)");
    distill_cmd->add_option("--seed", dist.seed, "Run seed (split sampling and batch order)");
    distill_cmd->add_option("--out", dist.out, "Student parameters (params.bin)");
    distill_cmd->add_option("--curve", dist.curve, "Training curve CSV");
    distill_cmd->add_option("--base-out", dist.base_out, "Also write the pretrained base/teacher");
    distill_cmd->add_flag("--print-default-config", dist.print_default, "Print the default config and exit");

    ReportArgs rep;
    auto* report = app.add_subcommand("report", "Mean and population std of metrics across run logs");
    report->add_option("runs", rep.runs, "Run logs, typically one per seed")->required();
    report->add_option("--out", rep.out, "Summary CSV (stdout if omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : code(ExitCode::kConfig);
    }

    try {
        if (*validate) return cmd_validate(taxonomy_path);
        if (*generate) return cmd_generate(gen);
        if (*run_cmd) return cmd_run(run);
        if (*score_cmd) return cmd_score(score);
        if (*compare) return cmd_compare(cmp);
        if (*distill_cmd) return cmd_distill(dist);
        if (*report) return cmd_report(rep);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return code(ExitCode::kConfig);
    } catch (const BackendError& e) {
        std::cerr << "backend error (" << to_string(e.kind()) << "): " << e.what() << "\n";
        return code(ExitCode::kBackend);
    } catch (const TaxonomyError& e) {
        std::cerr << "invalid taxonomy (" << to_string(e.kind()) << "): " << e.what() << "\n";
        return code(ExitCode::kValidation);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return code(ExitCode::kValidation);
    }
    return code(ExitCode::kOk);
}
