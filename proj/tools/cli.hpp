#pragma once

// The `unso` command line: train | ortho | curve | bench | flops.
//
// Exit codes: 0 ok, 2 numerical failure (divergence, degenerate input),
// 64 usage error, 65 malformed input file, 66 missing input file,
// 73 output file cannot be created. Data goes to stdout or --out;
// diagnostics go to stderr.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "unso/unso.hpp"

#ifndef UNSO_DATA_DIR
#define UNSO_DATA_DIR "data"
#endif

namespace unso::cli {

enum ExitCode : int {
    kOk = 0,
    kNumericFailure = 2,
    kUsage = 64,
    kDataError = 65,
    kNoInput = 66,
    kCantCreate = 73,
};

struct UsageError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct MissingFile : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct CantCreate : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline std::string data_dir()
{
    if (const char* env = std::getenv("UNSO_DATA_DIR"); env && *env)
        return env;
    return UNSO_DATA_DIR;
}

inline std::string default_coeffs_path() { return data_dir() + "/unso_n14.txt"; }
inline std::string default_cesista_path() { return data_dir() + "/cesista_t5.txt"; }
inline std::string default_schedule_path() { return data_dir() + "/schedule_t5.txt"; }

inline std::ifstream open_input(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw MissingFile("cannot open '" + path + "'");
    return in;
}

/// Writes through `fn` to `path`, or to `out` when path is "-".
template <class Fn>
void write_output(const std::string& path, std::ostream& out, Fn&& fn)
{
    if (path == "-") {
        fn(out);
        return;
    }
    std::ofstream f(path);
    if (!f)
        throw CantCreate("cannot create '" + path + "'");
    fn(f);
    if (!f)
        throw CantCreate("write failed for '" + path + "'");
}

inline CoefficientSet load_coefficients(const std::string& path)
{
    auto in = open_input(path);
    return read_coefficients(in);
}

inline Shape parse_shape(const std::string& s)
{
    const auto pos = s.find('x');
    if (pos == std::string::npos)
        throw UsageError("shape must look like HxW, got '" + s + "'");
    try {
        const auto h = detail::parse_size(s.substr(0, pos));
        const auto w = detail::parse_size(s.substr(pos + 1));
        if (h == 0 || w == 0 || h > 4096 || w > 4096)
            throw UsageError("shape out of range: '" + s + "'");
        return {h, w};
    } catch (const ParseError&) {
        throw UsageError("shape must look like HxW, got '" + s + "'");
    }
}

inline std::vector<std::string> split_list(const std::string& s)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty())
            out.push_back(item);
    return out;
}

inline ScalingSpec parse_scaling(const std::string& s)
{
    if (s == "gram")
        return {Scaling::FrobeniusGram};
    if (s == "plain")
        return {Scaling::FrobeniusPlain};
    if (s.rfind("gelfand", 0) == 0) {
        ScalingSpec spec{Scaling::Gelfand, 2};
        if (s.size() > 7) {
            if (s[7] != ':')
                throw UsageError("scaling must be gram, plain or gelfand[:k]");
            try {
                spec.gelfand_power = static_cast<int>(detail::parse_size(s.substr(8)));
            } catch (const ParseError&) {
                throw UsageError("bad gelfand power in '" + s + "'");
            }
            if (spec.gelfand_power < 1 || spec.gelfand_power > 64)
                throw UsageError("gelfand power out of range");
        }
        return spec;
    }
    throw UsageError("scaling must be gram, plain or gelfand[:k]");
}

inline StepForm parse_form(const std::string& s)
{
    if (s == "nested")
        return StepForm::Nested;
    if (s == "gram")
        return StepForm::Gram;
    throw UsageError("form must be nested or gram");
}

/// "name[:paramfile]" with name in unso|original|muon|cesista|schedule.
/// `iterations` of 0 keeps the method's default.
inline MethodSpec parse_method(const std::string& token, int iterations = 0)
{
    const auto colon = token.find(':');
    const std::string name = token.substr(0, colon);
    const std::optional<std::string> file =
        colon == std::string::npos ? std::nullopt : std::optional<std::string>(token.substr(colon + 1));

    if (name == "unso")
        return MethodSpec::unso(load_coefficients(file.value_or(default_coeffs_path())));
    if (name == "original" || name == "original_ns") {
        if (file)
            throw UsageError("original takes no parameter file");
        return MethodSpec::original_ns(iterations > 0 ? iterations : 8);
    }
    if (name == "muon" || name == "muon_ns") {
        if (file)
            throw UsageError("muon takes no parameter file");
        return MethodSpec::muon_ns(iterations > 0 ? iterations : 5);
    }
    if (name == "cesista" || name == "cesista_ns") {
        auto in = open_input(file.value_or(default_cesista_path()));
        return MethodSpec::cesista_ns(read_cesista_steps(in));
    }
    if (name == "schedule") {
        auto in = open_input(file.value_or(default_schedule_path()));
        return MethodSpec::external_schedule(read_schedule(in));
    }
    throw UsageError("unknown method '" + name + "'");
}

inline std::uint64_t effective_seed(std::uint64_t flag_value)
{
    if (const char* env = std::getenv("UNSO_SEED"); env && *env) {
        try {
            return detail::parse_size(env);
        } catch (const ParseError&) {
            throw UsageError("UNSO_SEED must be a non-negative integer");
        }
    }
    return flag_value;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
    int n = 14;
    int epochs = 20000;
    std::optional<double> lr; // default depends on the mode
    std::uint64_t seed = 0;
    std::string b_rule = "alg1-abs";
    std::string out;
    std::string loss_out;
    int samples = 1000;
    int decay_every = 10000;
    double decay_factor = 0.5;
    double sample_low = 0.0;
    double sample_high = 1.0;
    double overshoot_weight = 5.0;
    int cesista_steps = 0;
    std::string init = "muon";
    bool expand = false;
};

inline int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err)
{
    TrainConfig cfg;
    cfg.order = args.n;
    cfg.epochs = args.epochs;
    cfg.learning_rate = args.lr.value_or(args.cesista_steps > 0 ? kCesistaLearningRate : 0.1);
    cfg.seed = effective_seed(args.seed);
    const auto rule = parse_b_rule(args.b_rule);
    if (!rule)
        throw UsageError("b-rule must be exact, approx or alg1-abs");
    cfg.rule = *rule;
    cfg.samples_per_step = args.samples;
    cfg.decay_every = args.decay_every;
    cfg.decay_factor = args.decay_factor;
    cfg.sample_low = args.sample_low;
    cfg.sample_high = args.sample_high;
    cfg.overshoot_weight = args.overshoot_weight;
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }

    const std::string loss_path = args.loss_out.empty() ? (args.out == "-" ? "" : args.out + ".loss.csv")
                                                        : args.loss_out;
    auto write_loss = [&](const std::vector<double>& history) {
        if (loss_path.empty() || loss_path == "none")
            return;
        write_output(loss_path, out, [&](std::ostream& os) {
            os << "step,lr,loss\n";
            for (std::size_t s = 0; s < history.size(); ++s)
                os << s << ',' << format_double(lr_at(cfg, static_cast<long>(s)), 10) << ','
                   << format_double(history[s], 10) << '\n';
        });
    };

    if (args.cesista_steps > 0) {
        CesistaInit init;
        if (args.init == "muon")
            init = CesistaInit::Muon;
        else if (args.init == "identity")
            init = CesistaInit::Identity;
        else
            throw UsageError("init must be muon or identity");
        const auto state = train_cesista(args.cesista_steps, cfg, init);
        write_output(args.out, out, [&](std::ostream& os) {
            if (args.expand)
                write_schedule(os, expand(state.steps));
            else
                write_cesista_steps(os, state.steps);
        });
        write_loss(state.loss_history);
        if (!state.loss_history.empty())
            err << "final batch loss " << format_double(state.loss_history.back(), 6) << '\n';
        return kOk;
    }

    const auto state = train(cfg);
    write_output(args.out, out, [&](std::ostream& os) { write_coefficients(os, state.coeffs); });
    write_loss(state.loss_history);
    if (!state.loss_history.empty())
        err << "final batch loss " << format_double(state.loss_history.back(), 6) << '\n';
    return kOk;
}

struct OrthoArgs {
    std::string in;
    std::string out;
    std::string method = "unso";
    std::string coeffs;
    int iters = 0;
    std::string scaling;
    std::string form = "nested";
    bool validate = false;
};

inline int cmd_ortho(const OrthoArgs& args, std::ostream& out, std::ostream& err)
{
    auto in = open_input(args.in);
    const Matrix m = read_matrix(in);

    std::string token = args.method;
    if (!args.coeffs.empty())
        token += ":" + args.coeffs;
    MethodSpec spec = parse_method(token, args.iters);
    if (!args.scaling.empty())
        spec.scaling = parse_scaling(args.scaling);
    spec.form = parse_form(args.form);
    spec.validate_spectrum = args.validate;

    const auto result = orthogonalize(m, spec);
    for (const auto& w : result.warnings)
        err << "warning: " << w << '\n';
    write_output(args.out, out, [&](std::ostream& os) { write_matrix(os, result.y); });
    err << "method=" << spec.label() << " error=" << format_double(oriented_error(result.y), 10)
        << " flops=" << result.flops << '\n';
    return kOk;
}

struct CurveArgs {
    std::string methods = "unso,muon,original";
    std::size_t grid = 2000;
    double lo = 0.0005;
    double hi = 1.0;
    std::string out = "-";
    int terms = 0;
    std::string growth = "exponential";
    std::string extremes_out;
};

inline int cmd_curve(const CurveArgs& args, std::ostream& out, std::ostream&)
{
    if (args.terms > 0) {
        TermGrowth growth;
        if (args.growth == "exponential")
            growth = TermGrowth::Exponential;
        else if (args.growth == "linear")
            growth = TermGrowth::Linear;
        else
            throw UsageError("growth must be linear or exponential");
        if (args.grid < 2)
            throw UsageError("grid must be >= 2");
        const auto tc = sample_term_curves(args.terms, growth, args.grid);
        write_output(args.out, out, [&](std::ostream& os) { write_curves_csv(os, tc.table); });
        if (!args.extremes_out.empty())
            write_output(args.extremes_out, out, [&](std::ostream& os) {
                os << "k,x_star,y_star\n";
                for (std::size_t k = 0; k < tc.extremes.size(); ++k)
                    os << k + 1 << ',' << format_double(tc.extremes[k].x, 10) << ','
                       << format_double(tc.extremes[k].y, 10) << '\n';
            });
        return kOk;
    }

    std::vector<MethodSpec> methods;
    for (const auto& tok : split_list(args.methods))
        methods.push_back(parse_method(tok));
    if (methods.empty())
        throw UsageError("no methods given");
    if (args.grid < 2 || !(args.lo < args.hi) || args.lo < 0.0)
        throw UsageError("need grid >= 2 and 0 <= lo < hi");
    const auto table = sample_curves(methods, args.grid, args.lo, args.hi);
    write_output(args.out, out, [&](std::ostream& os) { write_curves_csv(os, table); });
    return kOk;
}

struct BenchArgs {
    std::string shapes = "128x128,128x512,128x1024";
    std::string methods = "original,muon,cesista,schedule,unso";
    int seeds = 10;
    std::uint64_t seed = 0;
    std::string out = "-";
};

inline int cmd_bench(const BenchArgs& args, std::ostream& out, std::ostream& err)
{
    std::vector<Shape> shapes;
    for (const auto& s : split_list(args.shapes))
        shapes.push_back(parse_shape(s));
    std::vector<MethodSpec> methods;
    for (const auto& tok : split_list(args.methods))
        methods.push_back(parse_method(tok));
    if (shapes.empty() || methods.empty() || args.seeds < 1)
        throw UsageError("bench needs shapes, methods and seeds >= 1");
    const auto base = effective_seed(args.seed);
    std::vector<std::uint64_t> seeds;
    for (int i = 0; i < args.seeds; ++i)
        seeds.push_back(base + static_cast<std::uint64_t>(i));
    const auto reports = run_table(shapes, methods, seeds);
    write_output(args.out, out, [&](std::ostream& os) { write_report_csv(os, reports); });
    err << reports.size() << " rows, " << seeds.size() << " seeds each\n";
    return kOk;
}

struct FlopsArgs {
    std::string method = "unso";
    std::string shape = "128x512";
    int n = 14;
    int iters = 0;
    std::string form = "nested";
    std::string scaling;
    std::uint64_t seed = 0;
};

inline int cmd_flops(const FlopsArgs& args, std::ostream& out, std::ostream&)
{
    const Shape shape = parse_shape(args.shape);
    MethodSpec spec;
    if (args.method == "unso") {
        if (args.n < 1 || args.n > 40)
            throw UsageError("n must be in [1, 40]");
        // FLOPs do not depend on coefficient values.
        spec = MethodSpec::unso(CoefficientSet::constant(args.n, 1.0));
    } else {
        spec = parse_method(args.method, args.iters);
    }
    if (!args.scaling.empty())
        spec.scaling = parse_scaling(args.scaling);
    spec.form = parse_form(args.form);

    const auto m = gaussian_matrix(shape.rows, shape.cols, effective_seed(args.seed));
    const auto result = orthogonalize(m, spec);
    const auto model = analytic_flops(spec, shape.rows, shape.cols);
    const std::size_t w = std::max(shape.rows, shape.cols);
    const std::size_t long_products = shape.rows == shape.cols ? result.products.size() : [&] {
        std::size_t c = 0;
        for (const auto& p : result.products)
            c += p.touches(w) ? 1 : 0;
        return c;
    }();
    out << "method,rows,cols,measured,analytic,products,long_side_products\n";
    out << spec.label() << ',' << shape.rows << ',' << shape.cols << ',' << result.flops << ',' << model << ','
        << result.products.size() << ',' << long_products << '\n';
    return kOk;
}

// ---------------------------------------------------------------------------

inline int run(std::vector<std::string> argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Unified Newton-Schulz orthogonalization: train, apply and benchmark"};
    app.name("unso");
    app.require_subcommand(1);

    TrainArgs ta;
    auto* train_cmd = app.add_subcommand("train", "fit UNSO coefficients (or Cesista steps)");
    train_cmd->add_option("--n", ta.n, "polynomial order N")->capture_default_str();
    train_cmd->add_option("--epochs", ta.epochs, "Adam steps")->capture_default_str();
    train_cmd->add_option("--lr", ta.lr, "initial learning rate (default 0.1, or 0.001 with --cesista)");
    train_cmd->add_option("--seed", ta.seed, "sampling seed (UNSO_SEED overrides)")->capture_default_str();
    train_cmd->add_option("--b-rule", ta.b_rule, "exact | approx | alg1-abs")->capture_default_str();
    train_cmd->add_option("--out", ta.out, "coefficient file ('-' for stdout)")->required();
    train_cmd->add_option("--loss-out", ta.loss_out, "loss CSV (default <out>.loss.csv, 'none' to skip)");
    train_cmd->add_option("--samples", ta.samples, "samples per step")->capture_default_str();
    train_cmd->add_option("--decay-every", ta.decay_every, "steps between lr decays")->capture_default_str();
    train_cmd->add_option("--decay-factor", ta.decay_factor, "lr decay factor")->capture_default_str();
    train_cmd->add_option("--sample-low", ta.sample_low, "lower end of the sampling interval")->capture_default_str();
    train_cmd->add_option("--sample-high", ta.sample_high, "upper end of the sampling interval")->capture_default_str();
    train_cmd->add_option("--overshoot-weight", ta.overshoot_weight, "extra penalty on f(x) > 1")->capture_default_str();
    train_cmd->add_option("--cesista", ta.cesista_steps, "train T per-step Cesista parameters instead");
    train_cmd->add_option("--init", ta.init, "Cesista init: muon | identity")->capture_default_str();
    train_cmd->add_flag("--expand", ta.expand, "with --cesista, write the expanded (a, b, c) schedule");

    OrthoArgs oa;
    auto* ortho_cmd = app.add_subcommand("ortho", "orthogonalize a matrix file");
    ortho_cmd->add_option("--in", oa.in, "input matrix file")->required();
    ortho_cmd->add_option("--out", oa.out, "output matrix file ('-' for stdout)")->required();
    ortho_cmd->add_option("--method", oa.method, "unso | original | muon | cesista | schedule")->capture_default_str();
    ortho_cmd->add_option("--coeffs", oa.coeffs, "coefficient or step-parameter file");
    ortho_cmd->add_option("--iters", oa.iters, "iterations for original/muon");
    ortho_cmd->add_option("--scaling", oa.scaling, "gram | plain | gelfand[:k]");
    ortho_cmd->add_option("--form", oa.form, "quintic step form: nested | gram")->capture_default_str();
    ortho_cmd->add_flag("--validate", oa.validate, "check scaled singular values with the SVD oracle");

    CurveArgs ca;
    auto* curve_cmd = app.add_subcommand("curve", "sample scalar maps on a grid");
    curve_cmd->add_option("--methods", ca.methods, "comma list of name[:paramfile]")->capture_default_str();
    curve_cmd->add_option("--grid", ca.grid, "grid points")->capture_default_str();
    curve_cmd->add_option("--lo", ca.lo, "grid start")->capture_default_str();
    curve_cmd->add_option("--hi", ca.hi, "grid end")->capture_default_str();
    curve_cmd->add_option("--out", ca.out, "CSV path ('-' for stdout)")->capture_default_str();
    curve_cmd->add_option("--terms", ca.terms, "emit term curves f_1..f_N instead");
    curve_cmd->add_option("--growth", ca.growth, "term exponent growth: linear | exponential")->capture_default_str();
    curve_cmd->add_option("--extremes-out", ca.extremes_out, "CSV of term peaks (with --terms)");

    BenchArgs ba;
    auto* bench_cmd = app.add_subcommand("bench", "error/FLOPs table over shapes x methods x seeds");
    bench_cmd->add_option("--shapes", ba.shapes, "comma list of HxW")->capture_default_str();
    bench_cmd->add_option("--methods", ba.methods, "comma list of name[:paramfile]")->capture_default_str();
    bench_cmd->add_option("--seeds", ba.seeds, "number of seeds")->capture_default_str();
    bench_cmd->add_option("--seed", ba.seed, "first seed (UNSO_SEED overrides)")->capture_default_str();
    bench_cmd->add_option("--out", ba.out, "CSV path ('-' for stdout)")->capture_default_str();

    FlopsArgs fa;
    auto* flops_cmd = app.add_subcommand("flops", "measured vs analytic FLOPs for one method and shape");
    flops_cmd->add_option("--method", fa.method, "unso | original | muon | cesista[:file] | schedule[:file]")
        ->capture_default_str();
    flops_cmd->add_option("--shape", fa.shape, "HxW")->capture_default_str();
    flops_cmd->add_option("--n", fa.n, "UNSO order")->capture_default_str();
    flops_cmd->add_option("--iters", fa.iters, "iterations for original/muon");
    flops_cmd->add_option("--form", fa.form, "quintic step form: nested | gram")->capture_default_str();
    flops_cmd->add_option("--scaling", fa.scaling, "gram | plain | gelfand[:k]");
    flops_cmd->add_option("--seed", fa.seed, "input matrix seed")->capture_default_str();

    std::reverse(argv.begin(), argv.end());
    try {
        app.parse(argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "unso: " << e.what() << "\n\n" << app.help();
        return kUsage;
    }

    try {
        if (train_cmd->parsed())
            return cmd_train(ta, out, err);
        if (ortho_cmd->parsed())
            return cmd_ortho(oa, out, err);
        if (curve_cmd->parsed())
            return cmd_curve(ca, out, err);
        if (bench_cmd->parsed())
            return cmd_bench(ba, out, err);
        if (flops_cmd->parsed())
            return cmd_flops(fa, out, err);
    } catch (const UsageError& e) {
        err << "unso: " << e.what() << '\n';
        return kUsage;
    } catch (const MissingFile& e) {
        err << "unso: " << e.what() << '\n';
        return kNoInput;
    } catch (const ParseError& e) {
        err << "unso: " << e.what() << '\n';
        return kDataError;
    } catch (const CantCreate& e) {
        err << "unso: " << e.what() << '\n';
        return kCantCreate;
    } catch (const DegenerateInput& e) {
        err << "unso: " << e.what() << '\n';
        return kNumericFailure;
    } catch (const TrainingFailure& e) {
        err << "unso: " << e.what() << '\n';
        return kNumericFailure;
    } catch (const std::invalid_argument& e) {
        err << "unso: " << e.what() << '\n';
        return kUsage;
    }
    err << "unso: no subcommand\n";
    return kUsage;
}

inline int run(int argc, char** argv, std::ostream& out, std::ostream& err)
{
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i)
        args.emplace_back(argv[i]);
    return run(std::move(args), out, err);
}

} // namespace unso::cli
