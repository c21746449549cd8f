#include <iostream>

#include <CLI11.hpp>

#include "textfusion/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"textfusion: multi-modal scene-text + visual fine-grained classifier"};
    app.require_subcommand(1);

    textfusion::cli::SynthOptions synth;
    CLI::App* synth_cmd =
        app.add_subcommand("synth", "generate a synthetic dataset manifest");
    synth_cmd->add_option("kind", synth.kind, "overfit | text_only | noisy")->required();
    synth_cmd->add_option("--k", synth.k, "number of classes (2..10)");
    synth_cmd->add_option("--per-class", synth.per_class, "samples per class");
    synth_cmd->add_option("--v-dim", synth.v_dim, "visual feature dimension");
    synth_cmd->add_option("--noise", synth.noise, "misleading keywords per sample (noisy)");
    synth_cmd->add_option("--seed", synth.seed, "generator seed");
    synth_cmd->add_option("--out", synth.out, "manifest output path")->required();
    synth_cmd->add_option("--embeddings-out", synth.embeddings_out,
                          "also write the bundled fixture embedding table here");
    synth_cmd->add_option("--sidecar", synth.sidecar,
                          "write visual vectors to this float32 sidecar "
                          "(relative to the manifest)");

    textfusion::cli::TrainOptions train;
    CLI::App* train_cmd = app.add_subcommand("train", "train a model from a config file");
    train_cmd->add_option("--config", train.config_path, "key = value run configuration")
        ->required();

    textfusion::cli::EvalOptions eval;
    CLI::App* eval_cmd =
        app.add_subcommand("eval", "classification AP/mAP report for a checkpoint");
    eval_cmd->add_option("--checkpoint", eval.checkpoint, "trained checkpoint")->required();
    eval_cmd->add_option("--manifest", eval.manifest, "dataset manifest")->required();
    eval_cmd->add_option("--embeddings", eval.embeddings, "embedding table path or "
                         "'fixture'")->required();
    eval_cmd->add_option("--split", eval.split, "train or test (default test)");
    eval_cmd->add_option("--report-dir", eval.report_dir, "report output directory")
        ->required();

    textfusion::cli::RetrieveOptions retrieve;
    CLI::App* retrieve_cmd = app.add_subcommand(
        "retrieve", "rank the train split against test queries by cosine similarity");
    retrieve_cmd->add_option("--checkpoint", retrieve.checkpoint, "trained checkpoint")
        ->required();
    retrieve_cmd->add_option("--manifest", retrieve.manifest, "dataset manifest")
        ->required();
    retrieve_cmd->add_option("--embeddings", retrieve.embeddings,
                             "embedding table path or 'fixture'")->required();
    retrieve_cmd->add_option("--report-dir", retrieve.report_dir,
                             "report output directory")->required();

    textfusion::cli::GradcheckOptions gradcheck;
    CLI::App* gradcheck_cmd = app.add_subcommand(
        "gradcheck", "check analytic gradients against central finite differences");
    gradcheck_cmd->add_option("--seed", gradcheck.seed, "seed for the micro-model");
    gradcheck_cmd->add_option("--v-dim", gradcheck.v_dim, "visual dimension");
    gradcheck_cmd->add_option("--t-dim", gradcheck.t_dim, "text dimension");
    gradcheck_cmd->add_option("--fused-dim", gradcheck.fused_v_dim,
                              "projected visual dimension");
    gradcheck_cmd->add_option("--k", gradcheck.num_classes, "number of classes");
    gradcheck_cmd->add_option("--n-max", gradcheck.n_max, "text feature width");
    gradcheck_cmd->add_option("--batch", gradcheck.batch, "micro-batch size");
    gradcheck_cmd->add_option("--step", gradcheck.step, "finite-difference step");
    gradcheck_cmd->add_option("--tolerance", gradcheck.tolerance,
                              "max relative error to pass");
    gradcheck_cmd->add_flag("--corrupt", gradcheck.corrupt,
                            "testing hook: perturb one analytic gradient so the "
                            "check must fail");

    CLI11_PARSE(app, argc, argv);

    if (synth_cmd->parsed())
        return textfusion::cli::cmd_synth(synth, std::cout, std::cerr);
    if (train_cmd->parsed())
        return textfusion::cli::cmd_train(train, std::cout, std::cerr);
    if (eval_cmd->parsed()) return textfusion::cli::cmd_eval(eval, std::cout, std::cerr);
    if (retrieve_cmd->parsed())
        return textfusion::cli::cmd_retrieve(retrieve, std::cout, std::cerr);
    if (gradcheck_cmd->parsed())
        return textfusion::cli::cmd_gradcheck(gradcheck, std::cout, std::cerr);
    return 1;
}
