#include "crimecast/cli.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "crimecast/config.hpp"
#include "crimecast/csv.hpp"
#include "crimecast/errors.hpp"
#include "crimecast/evaluation.hpp"
#include "crimecast/ingest.hpp"
#include "crimecast/synthetic.hpp"

namespace crimecast {

namespace {

// wrong arity or unknown subcommand: usage text, exit 64
struct UsageFailure {
    std::string message;
};

void print_usage(std::ostream& err) {
    err << "usage: crimecast <command> [args]\n"
           "commands:\n"
           "  validate <config>         check the input file set and report its shape\n"
           "  synth <spec> <out-dir>    generate a synthetic study area\n"
           "  features <config>         write the assembled design matrices\n"
           "  fit <config>              write full-sample coefficient tables\n"
           "  forecast <config>         write final-week one-step forecasts\n"
           "  evaluate <config>         rolling evaluation across models and settings\n"
           "  select-features <config>  sweep the feature-definition grid\n"
           "  importance <config>       permutation-importance mean ranks\n"
           "  diagnose <config>         per-week spatial autocorrelation table\n";
}

std::string out_path(const RunConfig& config, const std::string& name) {
    std::filesystem::create_directories(config.output_dir);
    return (std::filesystem::path(config.output_dir) / name).string();
}

RunConfig load_config(const std::string& path) {
    RunConfig config = parse_run_config(path);
    config.validate();
    return config;
}

int cmd_validate(const std::string& config_path, std::ostream& out) {
    const RunConfig config = load_config(config_path);
    const IngestResult data = ingest(config.inputs);
    long flow_entries = 0;
    for (const FlowMatrix& f : data.panel.flows)
        flow_entries += static_cast<long>(f.entries.size());
    out << "ok: " << data.panel.n_units << " units, " << data.panel.n_weeks << " weeks, "
        << data.w.edge_count() << " adjacency edges, " << flow_entries << " flow entries"
        << (data.partition.has_polygons() ? ", polygons present" : "") << "\n";
    return kExitOk;
}

int cmd_synth(const std::string& spec_path, const std::string& out_dir, std::ostream& out) {
    const SyntheticSpec spec = parse_synthetic_spec(spec_path);
    generate_synthetic(spec, out_dir);
    out << "wrote " << to_string(spec.kind) << " study area: " << spec.g * spec.g
        << " units, " << spec.n_weeks << " weeks -> " << out_dir << "\n";
    return kExitOk;
}

int cmd_features(const std::string& config_path, std::ostream& out) {
    const RunConfig config = load_config(config_path);
    const IngestResult data = ingest(config.inputs);
    for (int id : config.setting_ids) {
        const Setting setting = Setting::by_id(id);
        const auto [design, y] = assemble_design(data.panel, config.crime_type, setting,
                                                 config.modes, 2, data.panel.n_weeks);
        std::vector<std::string> header{"unit_id", "week"};
        header.insert(header.end(), design.column_names.begin(), design.column_names.end());
        header.push_back("response");
        const std::string path =
            out_path(config, "design_setting" + std::to_string(id) + ".csv");
        CsvWriter writer(path, header);
        for (Eigen::Index r = 0; r < design.x.rows(); ++r) {
            const auto& [unit, week] = design.rows[static_cast<std::size_t>(r)];
            std::vector<std::string> row{
                data.panel.unit_ids[static_cast<std::size_t>(unit)], format_int(week)};
            for (Eigen::Index c = 0; c < design.x.cols(); ++c)
                row.push_back(format_double(design.x(r, c)));
            row.push_back(format_double(y(r)));
            writer.row(row);
        }
        out << path << ": " << design.x.rows() << " rows, " << design.x.cols()
            << " columns\n";
    }
    return kExitOk;
}

int cmd_fit(const std::string& config_path, std::ostream& out) {
    const RunConfig config = load_config(config_path);
    std::vector<ForecasterKind> statistical;
    for (ForecasterKind kind : config.models)
        if (!is_ml_kind(kind)) statistical.push_back(kind);
    if (statistical.empty())
        throw ValidationError("fit needs at least one statistical model kind");

    const IngestResult data = ingest(config.inputs);
    for (int id : config.setting_ids) {
        const Setting setting = Setting::by_id(id);
        const auto [design, y] = assemble_design(data.panel, config.crime_type, setting,
                                                 config.modes, 2, data.panel.n_weeks);
        const std::string path =
            out_path(config, "coefficients_setting" + std::to_string(id) + ".csv");
        CsvWriter writer(path,
                         {"variable", "model", "estimate", "std_error", "p_value", "scale"});
        for (ForecasterKind kind : statistical) {
            const ModelFit fit = fit_model(econ_kind_of(kind), design, y, data.w);
            const std::string model = to_string(kind);
            const char* scale = is_count_model(fit.kind) ? "log" : "response";
            for (Eigen::Index k = 0; k < fit.beta.size(); ++k)
                writer.row({fit.beta_names[static_cast<std::size_t>(k)], model,
                            format_double(fit.beta(k)), format_double(fit.std_errors(k)),
                            format_double(two_sided_p(fit.beta(k), fit.std_errors(k))),
                            scale});
            if (kind == ForecasterKind::SAR)
                writer.row({"rho", model, format_double(fit.rho), "na", "na", scale});
            if (kind == ForecasterKind::CAR)
                writer.row({"delta", model, format_double(fit.delta), "na", "na", scale});
            if (!std::isnan(fit.sigma2))
                writer.row({"sigma2", model, format_double(fit.sigma2), "na", "na", scale});
        }
        out << path << "\n";
    }
    return kExitOk;
}

void write_forecast_rows(CsvWriter& writer, const PanelData& panel,
                         const EvaluationReport& report) {
    const std::string crime = to_string(report.crime_type);
    const std::string model = to_string(report.kind);
    const std::string setting = format_int(report.setting_id);
    for (const WindowResult& window : report.windows)
        for (int i = 0; i < panel.n_units; ++i)
            writer.row({crime, model, setting, format_int(window.window_index),
                        panel.unit_ids[static_cast<std::size_t>(i)],
                        format_int(window.target_week), format_double(window.actual(i)),
                        format_double(window.forecast(i)), format_double(window.error(i))});
}

const std::vector<std::string> kForecastHeader{"crime_type", "model",  "setting",
                                               "window",     "unit_id", "week",
                                               "actual",     "forecast", "error"};

int cmd_forecast(const std::string& config_path, std::ostream& out) {
    const RunConfig config = load_config(config_path);
    const IngestResult data = ingest(config.inputs);
    const std::string path = out_path(config, "forecasts.csv");
    CsvWriter writer(path, kForecastHeader);
    for (ForecasterKind kind : config.models) {
        EvaluationPlan plan = config.plan_for(kind);
        plan.h = data.panel.n_weeks - 1;  // single window: fit through T-1, forecast week T
        for (int id : config.setting_ids)
            write_forecast_rows(writer, data.panel,
                                run_rolling(data.panel, data.w, config.crime_type, id,
                                            config.modes, kind, plan));
    }
    out << path << "\n";
    return kExitOk;
}

int cmd_evaluate(const std::string& config_path, std::ostream& out) {
    const RunConfig config = load_config(config_path);
    const IngestResult data = ingest(config.inputs);
    // all models share one plan apart from the tuning grid, which is per-kind;
    // compare_settings re-derives it internally through run_rolling
    SettingComparison comparison;
    {
        // per-kind grids require one comparison per kind when a grid file is
        // present; without one the default grids apply inside run_rolling
        comparison.crime_type = config.crime_type;
        comparison.models = config.models;
        comparison.setting_ids = config.setting_ids;
        const Eigen::Index n_models = static_cast<Eigen::Index>(config.models.size());
        const Eigen::Index n_settings = static_cast<Eigen::Index>(config.setting_ids.size());
        comparison.mse.resize(n_models, n_settings);
        comparison.pct_vs_baseline.resize(n_models, n_settings);
        comparison.reports.resize(config.models.size());
        for (std::size_t m = 0; m < config.models.size(); ++m) {
            const SettingComparison row = compare_settings(
                data.panel, data.w, config.crime_type, {config.models[m]},
                config.setting_ids, config.modes, config.plan_for(config.models[m]));
            comparison.mse.row(static_cast<Eigen::Index>(m)) = row.mse.row(0);
            comparison.pct_vs_baseline.row(static_cast<Eigen::Index>(m)) =
                row.pct_vs_baseline.row(0);
            comparison.reports[m] = row.reports[0];
        }
    }

    const std::string forecast_path = out_path(config, "forecasts.csv");
    CsvWriter forecasts(forecast_path, kForecastHeader);
    for (const auto& model_reports : comparison.reports)
        for (const EvaluationReport& report : model_reports)
            write_forecast_rows(forecasts, data.panel, report);

    const std::string summary_path = out_path(config, "mse_summary.csv");
    CsvWriter summary(summary_path,
                      {"crime_type", "model", "setting", "mse", "pct_vs_setting1"});
    for (std::size_t m = 0; m < config.models.size(); ++m)
        for (std::size_t s = 0; s < config.setting_ids.size(); ++s)
            summary.row({to_string(config.crime_type), to_string(config.models[m]),
                         format_int(config.setting_ids[s]),
                         format_double(comparison.mse(m, s)),
                         format_double(comparison.pct_vs_baseline(m, s))});
    out << forecast_path << "\n" << summary_path << "\n";
    return kExitOk;
}

int cmd_select_features(const std::string& config_path, std::ostream& out) {
    const RunConfig config = load_config(config_path);
    const IngestResult data = ingest(config.inputs);
    const FeatureSelectionResult result = select_feature_definitions(
        data.panel, data.w, config.crime_type, config.plan_for(ForecasterKind::CAR));
    const std::string path = out_path(config, "selection.csv");
    CsvWriter writer(path,
                     {"crime_type", "poi_mode", "twitter_mode", "taxi_mode", "mse", "winner"});
    bool winner_written = false;
    for (const auto& cell : result.cells) {
        const bool is_winner = !winner_written && cell.mse == result.winner_mse;
        winner_written = winner_written || is_winner;
        writer.row({to_string(result.crime_type), to_string(cell.modes.poi),
                    to_string(cell.modes.twitter), to_string(cell.modes.taxi),
                    format_double(cell.mse), is_winner ? "1" : "0"});
    }
    out << path << ": winner " << to_string(result.winner.poi) << "/"
        << to_string(result.winner.twitter) << "/" << to_string(result.winner.taxi)
        << " mse " << format_double(result.winner_mse) << "\n";
    return kExitOk;
}

int cmd_importance(const std::string& config_path, std::ostream& out) {
    const RunConfig config = load_config(config_path);
    ForecasterKind kind = ForecasterKind::RF;
    bool found = false;
    for (ForecasterKind candidate : config.models)
        if (is_ml_kind(candidate)) {
            kind = candidate;
            found = true;
            break;
        }
    if (!found) throw ValidationError("importance needs a machine-learning model kind");

    const IngestResult data = ingest(config.inputs);
    const std::string path = out_path(config, "importance.csv");
    CsvWriter writer(path,
                     {"crime_type", "setting", "variable", "mean_rank", "ranks_by_window"});
    for (int id : config.setting_ids) {
        const MeanRankReport report =
            rolling_importance(data.panel, data.w, config.crime_type, id, config.modes, kind,
                               config.plan_for(kind));
        for (std::size_t v = 0; v < report.variables.size(); ++v) {
            std::ostringstream ranks;
            for (std::size_t t = 0; t < report.ranks_by_window.size(); ++t) {
                if (t) ranks << ";";
                ranks << report.ranks_by_window[t][v];
            }
            writer.row({to_string(config.crime_type), format_int(id), report.variables[v],
                        format_double(report.mean_rank[v]), ranks.str()});
        }
    }
    out << path << "\n";
    return kExitOk;
}

int cmd_diagnose(const std::string& config_path, std::ostream& out) {
    const RunConfig config = load_config(config_path);
    const IngestResult data = ingest(config.inputs);
    const Eigen::MatrixXd& counts = data.panel.crime(config.crime_type);
    const std::string path = out_path(config, "moran.csv");
    CsvWriter writer(path, {"week", "i_stat", "expected", "variance", "z", "p"});
    double total = 0.0;
    for (int t = 1; t <= data.panel.n_weeks; ++t) {
        const MoranResult moran = morans_i(counts.col(t - 1), data.w);
        writer.row({format_int(t), format_double(moran.i_stat), format_double(moran.expected),
                    format_double(moran.variance), format_double(moran.z),
                    format_double(moran.p)});
        total += moran.i_stat;
    }
    out << path << ": average I " << format_double(total / data.panel.n_weeks) << " over "
        << data.panel.n_weeks << " weeks\n";
    return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    try {
        if (argc < 2) throw UsageFailure{"missing subcommand"};
        const std::string command = argv[1];
        std::vector<std::string> args;
        for (int i = 2; i < argc; ++i) args.emplace_back(argv[i]);
        auto one_arg = [&](const char* what) -> const std::string& {
            if (args.size() != 1)
                throw UsageFailure{command + " takes exactly one argument: " + what};
            return args[0];
        };

        if (command == "validate") return cmd_validate(one_arg("<config>"), out);
        if (command == "synth") {
            if (args.size() != 2)
                throw UsageFailure{"synth takes exactly two arguments: <spec> <out-dir>"};
            return cmd_synth(args[0], args[1], out);
        }
        if (command == "features") return cmd_features(one_arg("<config>"), out);
        if (command == "fit") return cmd_fit(one_arg("<config>"), out);
        if (command == "forecast") return cmd_forecast(one_arg("<config>"), out);
        if (command == "evaluate") return cmd_evaluate(one_arg("<config>"), out);
        if (command == "select-features") return cmd_select_features(one_arg("<config>"), out);
        if (command == "importance") return cmd_importance(one_arg("<config>"), out);
        if (command == "diagnose") return cmd_diagnose(one_arg("<config>"), out);
        throw UsageFailure{"unknown subcommand \"" + command + "\""};
    } catch (const UsageFailure& e) {
        err << "error: " << e.message << "\n";
        print_usage(err);
        return kExitUsage;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const NumericalError& e) {
        err << "numerical error: " << e.what() << "\n";
        return kExitNumerical;
    }
    // unexpected std::exception escapes to the caller: a bug, not an input error
}

}  // namespace crimecast
