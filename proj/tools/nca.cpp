// nca: tag-to-class alignment pipeline.
//
// Subcommands: synth -> ingest -> train -> align (or baseline) -> eval.
// Exit codes: 0 success, 1 runtime/data failure, 2 usage error.

#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nca/align.hpp"
#include "nca/baseline.hpp"
#include "nca/core.hpp"
#include "nca/eval.hpp"
#include "nca/features.hpp"
#include "nca/ingest.hpp"
#include "nca/manifest.hpp"
#include "nca/model.hpp"
#include "nca/synth.hpp"
#include "nca/util.hpp"

namespace {

std::vector<nca::Tag> read_tags_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw nca::IoError("cannot open tags file: " + path);
    std::vector<nca::Tag> tags;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        tags.push_back(nca::parse_tag(line));
    }
    return tags;
}

struct IngestArgs {
    std::string osm, kg, links, out;
    nca::IngestConfig cfg;
    std::vector<std::string> coordinate_predicates;
    bool no_geographic = false;
};

void run_ingest(const IngestArgs& args) {
    nca::IngestConfig cfg = args.cfg;
    cfg.geographic_only = !args.no_geographic;
    cfg.coordinate_predicates.insert(args.coordinate_predicates.begin(),
                                     args.coordinate_predicates.end());

    auto osm = nca::load_osm(args.osm);
    auto kg = nca::load_kg(args.kg, cfg);
    auto links = nca::extract_links(args.links, cfg);
    nca::DatasetStats stats;
    auto dataset =
        nca::build_dataset(std::move(osm.nodes), std::move(kg.entities), std::move(links.links),
                           cfg, &stats);
    nca::save_dataset(dataset, args.out);

    nlohmann::json stats_json{{"nodes", dataset.nodes.size()},
                              {"entities", dataset.entities.size()},
                              {"links", dataset.links.size()},
                              {"classes_retained", dataset.classes.size()},
                              {"classes_before_filter", stats.classes_before_filter},
                              {"osm_rejected_lines", osm.rejected},
                              {"osm_duplicate_ids", osm.duplicates},
                              {"kg_rejected_lines", kg.rejected},
                              {"links_rejected", links.rejected},
                              {"links_dropped_missing_endpoint",
                               stats.links_dropped_missing_endpoint},
                              {"links_dropped_no_retained_class",
                               stats.links_dropped_no_retained_class},
                              {"entities_dropped_not_geographic",
                               stats.entities_dropped_not_geographic}};
    nca::write_file(args.out + ".stats.json", stats_json.dump(2) + "\n");

    nca::RunManifest manifest;
    manifest.command = "ingest";
    manifest.config = {{"type_predicate", cfg.type_predicate},
                       {"same_as_predicate", cfg.same_as_predicate},
                       {"min_entities_per_class", cfg.min_entities_per_class},
                       {"geographic_only", cfg.geographic_only},
                       {"coordinate_predicates", cfg.coordinate_predicates}};
    manifest.add_input(args.osm);
    manifest.add_input(args.kg);
    manifest.add_input(args.links);
    manifest.write(args.out);
    std::cout << "wrote " << args.out << " (" << dataset.links.size() << " links, "
              << dataset.classes.size() << " classes)\n";
}

struct TrainArgs {
    std::string dataset, model, loss_log, allowlist;
    nca::FeatureConfig features;
    nca::ModelConfig cfg;
    bool no_adversarial = false;
};

void run_train(const TrainArgs& args) {
    nca::ModelConfig cfg = args.cfg;
    cfg.adversarial_enabled = !args.no_adversarial;

    nca::FeatureConfig fcfg = args.features;
    if (!args.allowlist.empty()) {
        std::ifstream in(args.allowlist);
        if (!in) throw nca::IoError("cannot open allowlist: " + args.allowlist);
        std::set<std::string> allow;
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (!line.empty()) allow.insert(line);
        }
        fcfg.tag_allowlist = std::move(allow);
    }

    auto dataset = nca::load_dataset(args.dataset);
    auto space = nca::build_feature_space(dataset, fcfg);
    auto result = nca::train(dataset, space, cfg);
    nca::save_model(result.model, args.model);

    const std::string loss_log = args.loss_log.empty() ? args.model + ".loss.csv" : args.loss_log;
    std::string csv = "epoch,classification_loss,adverse_loss,discriminator_accuracy\n";
    char buf[128];
    for (const auto& row : result.log) {
        std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.6f\n", row.epoch, row.classification_loss,
                      row.adverse_loss, row.discriminator_accuracy);
        csv += buf;
    }
    nca::write_file(loss_log, csv);

    nca::RunManifest manifest;
    manifest.command = "train";
    manifest.config = nca::model_config_to_json(cfg);
    manifest.config["min_tag_occurrences"] = fcfg.min_tag_occurrences;
    manifest.config["min_value_frequency"] = fcfg.min_value_frequency;
    manifest.config["top_k_properties"] = fcfg.top_k_properties;
    manifest.config["allowlist"] = args.allowlist;
    manifest.seed = cfg.seed;
    manifest.add_input(args.dataset);
    manifest.write(args.model);
    std::cout << "trained on " << result.osm_examples << " OSM + " << result.kg_examples
              << " KG examples (" << space.osm_size() << "/" << space.kg_size()
              << " input dims, " << space.class_count() << " classes); final loss "
              << result.log.back().classification_loss << "\n";
}

struct AlignArgs {
    std::string model, tags, out, kg_profile;
    std::optional<double> threshold;
    bool all_space_tags = false;
};

void run_align(const AlignArgs& args) {
    auto model = nca::load_model(args.model);

    std::vector<nca::Tag> tags;
    if (args.all_space_tags) {
        for (const auto& [dim, idx] : model.feature_space.osm_dims)
            tags.push_back(nca::parse_tag(dim));
    } else {
        tags = read_tags_file(args.tags);
    }

    double threshold = 0.25;
    if (args.threshold)
        threshold = *args.threshold;
    else if (!args.kg_profile.empty())
        threshold = nca::default_threshold_for_profile(args.kg_profile);

    auto result = nca::extract_alignment(model, tags, threshold);
    nca::write_file(args.out, nca::alignment_to_tsv(result.pairs));

    nca::RunManifest manifest;
    manifest.command = "align";
    manifest.config = {{"threshold", threshold},
                       {"kg_profile", args.kg_profile},
                       {"all_space_tags", args.all_space_tags}};
    manifest.seed = model.config.seed;
    manifest.add_input(args.model);
    if (!args.tags.empty()) manifest.add_input(args.tags);
    manifest.write(args.out);
    std::cout << "wrote " << result.pairs.size() << " alignment pairs to " << args.out << "\n";
}

struct BaselineArgs {
    std::string dataset, tags, out;
    double threshold = 1.0;
    bool no_normalize = false;
};

void run_baseline(const BaselineArgs& args) {
    auto dataset = nca::load_dataset(args.dataset);
    auto tags = read_tags_file(args.tags);
    nca::BaselineConfig cfg;
    cfg.threshold = args.threshold;
    cfg.normalize = !args.no_normalize;
    auto pairs = nca::lev_align(tags, dataset.classes, cfg);
    nca::write_file(args.out, nca::alignment_to_tsv(pairs));

    nca::RunManifest manifest;
    manifest.command = "baseline";
    manifest.config = {{"threshold", cfg.threshold}, {"normalize", cfg.normalize}};
    manifest.add_input(args.dataset);
    manifest.add_input(args.tags);
    manifest.write(args.out);
    std::cout << "wrote " << pairs.size() << " baseline pairs to " << args.out << "\n";
}

struct EvalArgs {
    std::string pred, ground_truth, out;
    bool run_sweep = false;
    double sweep_step = 0.05;
};

void run_eval(const EvalArgs& args) {
    auto predicted = nca::alignment_from_tsv(nca::read_file(args.pred), args.pred);
    auto reference = nca::load_reference_alignment(args.ground_truth);

    nlohmann::json summary{{"prediction", args.pred},
                           {"ground_truth", args.ground_truth},
                           {"predicted_pairs", predicted.size()},
                           {"reference_pairs", reference.size()}};

    if (args.run_sweep) {
        auto produce = [&](double t) {
            std::set<nca::AlignmentPair> kept;
            for (const auto& p : predicted)
                if (p.confidence > t) kept.insert(p);
            return kept;
        };
        auto result =
            nca::sweep(produce, reference, nca::threshold_grid(args.sweep_step), true);
        nca::write_file(args.out + ".sweep.tsv", nca::sweep_to_tsv(result));
        summary["best_threshold"] = result.best_threshold;
        summary["best"] = nca::metrics_to_json(result.best);
    } else {
        summary["metrics"] = nca::metrics_to_json(nca::score(predicted, reference));
    }
    nca::write_file(args.out + ".summary.json", summary.dump(2) + "\n");

    nca::RunManifest manifest;
    manifest.command = "eval";
    manifest.config = {{"sweep", args.run_sweep}, {"sweep_step", args.sweep_step}};
    manifest.add_input(args.pred);
    manifest.add_input(args.ground_truth);
    manifest.write(args.out);
    if (args.run_sweep)
        std::cout << "best F1 " << summary["best"]["f1"].get<double>() << " at threshold "
                  << summary["best_threshold"].get<double>() << "\n";
    else
        std::cout << "F1 " << summary["metrics"]["f1"].get<double>() << "\n";
}

struct SynthArgs {
    std::string out;
    nca::SynthConfig cfg;
};

void run_synth(const SynthArgs& args) {
    auto fixture = nca::generate_fixture(args.cfg);
    auto paths = nca::write_fixture(fixture, args.out);

    nca::RunManifest manifest;
    manifest.command = "synth";
    manifest.config = {{"classes", args.cfg.classes},
                       {"nodes_per_class", args.cfg.nodes_per_class},
                       {"noise", args.cfg.noise},
                       {"noise_mode",
                        args.cfg.noise_mode == nca::NoiseMode::Swap ? "swap" : "distractor"}};
    manifest.seed = args.cfg.seed;
    manifest.add_input(paths.osm);
    manifest.add_input(paths.kg);
    manifest.add_input(paths.links);
    manifest.add_input(paths.ground_truth);
    manifest.write(args.out + "/fixture");
    std::cout << "wrote fixture to " << args.out << " (" << args.cfg.classes << " classes, "
              << args.cfg.classes * args.cfg.nodes_per_class << " nodes)\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"nca: align corpus tags with knowledge graph classes"};
    app.require_subcommand(1);
    app.set_config("--config", "", "config file (key=value; explicit flags win)");
    app.set_version_flag("--version", nca::kToolVersion);

    IngestArgs ingest;
    auto* cmd_ingest = app.add_subcommand("ingest", "load corpus, KG, and links into a dataset");
    cmd_ingest->add_option("--osm", ingest.osm, "OSM corpus (JSON lines)")->required();
    cmd_ingest->add_option("--kg", ingest.kg, "KG triples (N-Triples-style)")->required();
    cmd_ingest->add_option("--links", ingest.links, "identity-link triples")->required();
    cmd_ingest->add_option("--out", ingest.out, "output dataset path")->required();
    cmd_ingest->add_option("--min-class-size", ingest.cfg.min_entities_per_class,
                           "retain classes with strictly more linked entities than this");
    cmd_ingest->add_option("--type-predicate", ingest.cfg.type_predicate, "class label predicate");
    cmd_ingest->add_option("--sameas-predicate", ingest.cfg.same_as_predicate,
                           "identity link predicate");
    cmd_ingest->add_option("--coordinate-predicate", ingest.coordinate_predicates,
                           "coordinate predicate IRIs (enables the geographic filter)");
    cmd_ingest->add_flag("--no-geographic-only", ingest.no_geographic,
                         "keep entities without coordinates even when coordinate predicates are set");
    cmd_ingest->callback([&] { run_ingest(ingest); });

    TrainArgs train;
    auto* cmd_train = app.add_subcommand("train", "train the alignment model on a dataset");
    cmd_train->add_option("--dataset", train.dataset, "dataset from `nca ingest`")->required();
    cmd_train->add_option("--model", train.model, "output checkpoint path")->required();
    cmd_train->add_option("--loss-log", train.loss_log, "per-epoch loss CSV path");
    cmd_train->add_option("--epochs", train.cfg.epochs, "training epochs");
    cmd_train->add_option("--batch-size", train.cfg.batch_size, "examples per batch");
    cmd_train->add_option("--learning-rate", train.cfg.learning_rate, "Adam learning rate");
    cmd_train->add_option("--lambda", train.cfg.reversal_strength,
                          "gradient reversal strength");
    cmd_train->add_option("--disc-lr-scale", train.cfg.discriminator_lr_scale,
                          "discriminator learning-rate scale relative to the encoder");
    cmd_train->add_option("--disc-refit-steps", train.cfg.discriminator_refit_steps,
                          "discriminator-only refit steps per batch");
    cmd_train->add_option("--disc-weight-decay", train.cfg.discriminator_weight_decay,
                          "decoupled L2 decay on discriminator weights");
    cmd_train->add_option("--encoder-weight-decay", train.cfg.encoder_weight_decay,
                          "decoupled L2 decay on extraction and shared layers");
    cmd_train->add_flag("--no-adversarial", train.no_adversarial,
                        "disable the adversarial discriminator branch");
    cmd_train->add_option("--seed", train.cfg.seed, "RNG seed for init and shuffling");
    cmd_train->add_option("--osm-extract-dim", train.cfg.osm_extract_dim, "");
    cmd_train->add_option("--kg-extract-dim", train.cfg.kg_extract_dim, "");
    cmd_train->add_option("--latent-dim", train.cfg.latent_dim, "");
    cmd_train->add_option("--classifier-hidden-dim", train.cfg.classifier_hidden_dim, "");
    cmd_train->add_option("--min-tag-occurrences", train.features.min_tag_occurrences,
                          "minimum corpus occurrences for a tag or key dimension");
    cmd_train->add_option("--min-value-frequency", train.features.min_value_frequency,
                          "minimum value frequency for a tag dimension");
    cmd_train->add_option("--top-k-properties", train.features.top_k_properties,
                          "properties kept per class in the KG feature space");
    cmd_train->add_option("--allowlist", train.allowlist,
                          "file of allowlisted canonical tags (one per line)");
    cmd_train->callback([&] { run_train(train); });

    AlignArgs align;
    auto* cmd_align = app.add_subcommand("align", "probe a trained model for tag-class pairs");
    cmd_align->add_option("--model", align.model, "model checkpoint")->required();
    auto* tags_opt = cmd_align->add_option("--tags", align.tags,
                                           "file of canonical tags to probe (one per line)");
    auto* all_opt = cmd_align->add_flag("--all-space-tags", align.all_space_tags,
                                        "probe every dimension of the OSM feature space");
    tags_opt->excludes(all_opt);
    cmd_align->add_option("--out", align.out, "output alignment TSV")->required();
    double align_threshold = 0.0;
    auto* thr_opt = cmd_align->add_option("--threshold", align_threshold,
                                          "confidence threshold th_a in [0,1]");
    cmd_align->add_option("--kg-profile", align.kg_profile,
                          "wikidata (default th_a=0.25) or dbpedia (0.4)")
        ->check(CLI::IsMember({"wikidata", "dbpedia"}));
    cmd_align->callback([&] {
        if (!align.all_space_tags && align.tags.empty())
            throw CLI::RequiredError("--tags or --all-space-tags");
        if (thr_opt->count() > 0) align.threshold = align_threshold;
        run_align(align);
    });

    BaselineArgs baseline;
    auto* cmd_baseline =
        app.add_subcommand("baseline", "name-matching baseline over tags and dataset classes");
    cmd_baseline->add_option("--dataset", baseline.dataset, "dataset (source of class IRIs)")
        ->required();
    cmd_baseline->add_option("--tags", baseline.tags, "file of canonical tags")->required();
    cmd_baseline->add_option("--out", baseline.out, "output alignment TSV")->required();
    cmd_baseline->add_option("--threshold", baseline.threshold,
                             "normalized edit distance bound th_l in [0,1]");
    cmd_baseline->add_flag("--no-normalize", baseline.no_normalize,
                           "compare names without lowercasing/stripping");
    cmd_baseline->callback([&] { run_baseline(baseline); });

    EvalArgs eval;
    auto* cmd_eval = app.add_subcommand("eval", "score an alignment against ground truth");
    cmd_eval->add_option("--pred", eval.pred, "predicted alignment TSV")->required();
    cmd_eval->add_option("--ground-truth", eval.ground_truth, "reference alignment TSV")
        ->required();
    cmd_eval->add_option("--out", eval.out, "report base path")->required();
    cmd_eval->add_flag("--sweep", eval.run_sweep, "sweep the confidence threshold grid");
    cmd_eval->add_option("--sweep-step", eval.sweep_step, "sweep grid step (default 0.05)");
    cmd_eval->callback([&] { run_eval(eval); });

    SynthArgs synth;
    std::string noise_mode = "distractor";
    auto* cmd_synth = app.add_subcommand("synth", "generate a synthetic end-to-end fixture");
    cmd_synth->add_option("--classes", synth.cfg.classes, "number of classes k (>= 2)");
    cmd_synth->add_option("--nodes-per-class", synth.cfg.nodes_per_class, "nodes per class");
    cmd_synth->add_option("--noise", synth.cfg.noise, "noisy node fraction in [0,1]");
    cmd_synth->add_option("--noise-mode", noise_mode,
                          "distractor (extra wrong tag) or swap (replaces the right tag)")
        ->check(CLI::IsMember({"distractor", "swap"}));
    cmd_synth->add_option("--seed", synth.cfg.seed, "generator seed");
    cmd_synth->add_option("--out", synth.out, "output directory")->required();
    cmd_synth->callback([&] {
        if (synth.cfg.classes < 2) throw CLI::ValidationError("--classes must be >= 2");
        synth.cfg.noise_mode =
            noise_mode == "swap" ? nca::NoiseMode::Swap : nca::NoiseMode::Distractor;
        run_synth(synth);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
