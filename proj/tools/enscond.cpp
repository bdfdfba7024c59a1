// enscond: exact cone geometry, effective energy-enstrophy diffusion, and the
// verification reports around it. Subcommands: validate, qtable, simulate,
// verify. Outputs are plain text with a manifest next to them; identical
// (config, seed, flags) runs produce byte-identical tables.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <vector>

#include "enscond/effective.hpp"
#include "enscond/errors.hpp"
#include "enscond/geometry.hpp"
#include "enscond/qfun.hpp"
#include "enscond/reference.hpp"
#include "enscond/rng.hpp"
#include "enscond/spectrum.hpp"
#include "enscond/verify.hpp"
#include "enscond/version.hpp"

namespace fs = std::filesystem;
using namespace enscond;

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Manifest of a run. The hash covers everything that determines the numeric
// output (resolved spectrum, subcommand, seed, numeric parameters, version)
// and deliberately excludes wall-clock and paths, so output files can embed
// it and still be byte-identical across reruns.
class Manifest {
public:
    void add(const std::string& key, const std::string& value) {
        entries_.emplace_back(key, value);
    }
    void add(const std::string& key, double value) { add(key, fmt(value)); }
    void add(const std::string& key, std::uint64_t value) { add(key, std::to_string(value)); }
    void add(const std::string& key, int value) { add(key, std::to_string(value)); }

    std::string hash_hex() const {
        std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
        const auto mix = [&](const std::string& s) {
            for (const unsigned char c : s) {
                h ^= c;
                h *= 0x100000001b3ull;
            }
        };
        for (const auto& [k, v] : entries_) {
            mix(k);
            mix("=");
            mix(v);
            mix("\n");
        }
        char buf[20];
        std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)h);
        return buf;
    }

    void write(const fs::path& path, const std::vector<std::string>& outputs) const {
        std::ofstream out(path);
        if (!out) throw IoError("cannot write manifest: " + path.string());
        out << "manifest_hash = " << hash_hex() << "\n";
        for (const auto& [k, v] : entries_) out << k << " = " << v << "\n";
        const auto now = std::chrono::system_clock::now().time_since_epoch();
        out << "wall_clock_unix = "
            << std::chrono::duration_cast<std::chrono::seconds>(now).count() << "\n";
        for (const auto& o : outputs) out << "output = " << o << "\n";
    }

private:
    std::vector<std::pair<std::string, std::string>> entries_;
};

void echo_spectrum_into(Manifest& m, const Spectrum& s) {
    m.add("n", s.n());
    std::string mus, deltas;
    for (int i = 1; i <= s.n(); ++i) {
        if (i > 1) {
            mus += " ";
            deltas += " ";
        }
        mus += fmt(s.mu(i));
        deltas += fmt(s.delta_pair(i));
    }
    m.add("mu", mus);
    m.add("delta_pair", deltas);
    m.add("a", s.a());
}

struct CommonArgs {
    std::string config;
    std::string out = ".";
    std::uint64_t seed = 0;
    int threads = 0;
};

void add_common(CLI::App* cmd, CommonArgs* args, bool need_out) {
    cmd->add_option("--config", args->config, "spectrum configuration file")->required();
    cmd->add_option("--seed", args->seed, "random seed (echoed in all outputs)");
    cmd->add_option("--threads", args->threads,
                    "worker threads (0 = ENSCOND_THREADS or 1); never changes results");
    auto* o = cmd->add_option("--out", args->out, "output directory");
    if (need_out) o->required();
}

std::string sector_name(const Spectrum& s, ConePoint w) {
    const SectorLocation loc = locate_sector(s, w);
    switch (loc.kind) {
        case SectorLocation::Kind::Apex: return "apex";
        case SectorLocation::Kind::Ray: return "ray:" + std::to_string(loc.index);
        default: return "interior:" + std::to_string(loc.index);
    }
}

// start the chain at the coordinatewise stationary mean of (U, V)
ConePoint mean_start_point(const Spectrum& s) {
    double u = 0.0, v = 0.0;
    for (int ell = 1; ell <= s.N(); ++ell) {
        const double var = s.a() * (1.0 + s.delta(ell)) / 2.0;
        u += var;
        v += var / s.lambda(ell);
    }
    return {u, v};
}

// ---------------------------------------------------------------------------

int cmd_validate(const CommonArgs& args) {
    const Spectrum s = build_spectrum(load_spectrum_config(args.config));
    const ForcingConstants fc = forcing_constants(s);
    std::cout << "config ok: n = " << s.n() << ", N = " << s.N() << ", a = " << fmt(s.a())
              << ", B0 = " << fmt(fc.B0) << ", B1 = " << fmt(fc.B1) << "\n";
    return 0;
}

int cmd_qtable(const CommonArgs& args, int grid) {
    const Spectrum s = build_spectrum(load_spectrum_config(args.config));
    fs::create_directories(args.out);

    Manifest man;
    man.add("subcommand", std::string("qtable"));
    echo_spectrum_into(man, s);
    man.add("seed", args.seed);
    man.add("grid", grid);
    man.add("version", std::string(kVersion));

    const fs::path table_path = fs::path(args.out) / "qtable.tsv";
    std::ofstream out(table_path);
    if (!out) throw IoError("cannot write table: " + table_path.string());
    out << "# manifest " << man.hash_hex() << "\n";
    out << "u\tv\tsector";
    for (int i = 1; i <= s.n(); ++i) out << "\tqhat_" << i;
    out << "\tres_u\tres_v\tmin_gap\n";

    const double top = s.lambda_max();
    for (int iu = 1; iu <= grid; ++iu) {
        const double u = double(iu) / double(grid);
        for (int it = 0; it < grid; ++it) {
            const double r = 1.0 + double(it) / double(grid - 1) * (top - 1.0);
            const ConePoint w{u, u / r};
            const QVector q = qhat_eval(s, w);
            const auto [ru, rv] = identity_residuals(s, q, w);
            const auto gaps = monotonicity_gaps(s, w);
            double min_gap = std::numeric_limits<double>::infinity();
            for (const double g : gaps) min_gap = std::min(min_gap, g);
            out << fmt(w.u) << "\t" << fmt(w.v) << "\t" << sector_name(s, w);
            for (int i = 1; i <= s.n(); ++i) out << "\t" << fmt(q.qhat_i(i));
            out << "\t" << fmt(ru) << "\t" << fmt(rv) << "\t" << fmt(min_gap) << "\n";
        }
    }
    out.close();
    man.write(fs::path(args.out) / "manifest.txt", {table_path.string()});
    std::cout << "wrote " << table_path.string() << "\n";
    return 0;
}

int cmd_simulate(const CommonArgs& args, double dt, std::uint64_t steps, std::uint64_t burn_in,
                 int trajectories, bool dump, bool gzip, std::uint64_t dump_every) {
    const Spectrum s = build_spectrum(load_spectrum_config(args.config));
    fs::create_directories(args.out);

    Manifest man;
    man.add("subcommand", std::string("simulate"));
    echo_spectrum_into(man, s);
    man.add("seed", args.seed);
    man.add("dt", dt);
    man.add("steps", steps);
    man.add("burn_in", burn_in);
    man.add("trajectories", trajectories);
    man.add("dump_every", dump_every);
    man.add("version", std::string(kVersion));

    SimulateOptions opt;
    opt.dt = dt;
    opt.steps = steps;
    opt.burn_in = burn_in;
    opt.seed = args.seed;
    opt.trajectories = trajectories;
    opt.threads = args.threads;
    std::vector<std::string> outputs;
    const fs::path stats_path = fs::path(args.out) / "stats.txt";
    if (dump) {
        const fs::path dump_path =
            fs::path(args.out) / (gzip ? "trajectory.tsv.gz" : "trajectory.tsv");
        opt.dump_path = dump_path.string();
        opt.dump_gzip = gzip;
        opt.dump_every = dump_every;
        outputs.push_back(dump_path.string());
    }

    const ForcingConstants fc = forcing_constants(s);
    const ConePoint w0 = mean_start_point(s);
    const StationaryStats st = simulate(s, w0, opt);

    std::ofstream out(stats_path);
    if (!out) throw IoError("cannot write stats: " + stats_path.string());
    out << "# manifest " << man.hash_hex() << "\n";
    write_spectrum_echo(out, s);
    write_kv(out, "start.u", w0.u);
    write_kv(out, "start.v", w0.v);
    write_stats(out, st);
    write_conservation(out, conservation_report(s, st));
    write_condensation(out, condensation_report(s, st));
    out.close();
    outputs.insert(outputs.begin(), stats_path.string());
    man.write(fs::path(args.out) / "manifest.txt", outputs);

    std::cout << "E[U] = " << fmt(st.mean_u) << " +- " << fmt(st.se_u) << ", E[V] = "
              << fmt(st.mean_v) << " +- " << fmt(st.se_v) << " (B0/2 = " << fmt(fc.B0 / 2.0)
              << ")\n";
    std::cout << "wrote " << stats_path.string() << "\n";
    return 0;
}

int cmd_verify(const CommonArgs& args, std::uint64_t samples, std::uint64_t steps, double dt,
               int grid) {
    const Spectrum s = build_spectrum(load_spectrum_config(args.config));
    fs::create_directories(args.out);

    Manifest man;
    man.add("subcommand", std::string("verify"));
    echo_spectrum_into(man, s);
    man.add("seed", args.seed);
    man.add("samples", samples);
    man.add("steps", steps);
    man.add("dt", dt);
    man.add("grid", grid);
    man.add("version", std::string(kVersion));

    const fs::path report_path = fs::path(args.out) / "report.txt";
    std::ofstream out(report_path);
    if (!out) throw IoError("cannot write report: " + report_path.string());
    out << "# manifest " << man.hash_hex() << "\n";
    write_spectrum_echo(out, s);
    write_kv(out, "seed", args.seed);

    bool all_pass = true;
    const auto record = [&](const std::string& name, bool pass) {
        all_pass = all_pass && pass;
        write_kv(out, name + ".pass", std::string(pass ? "yes" : "no"));
        std::cout << (pass ? "PASS " : "FAIL ") << name << "\n";
    };

    // volumes: vertex sum against rejection sampling at the sector midpoints
    {
        bool ok = true;
        double worst_z = 0.0;
        for (int m = 2; m <= s.n(); ++m) {
            const double r = 0.5 * (s.mu(m - 1) + s.mu(m));
            const ConePoint w{r, 1.0};
            const VolumeEstimate exact = volume_lawrence(s, w);
            const VolumeEstimate mc = volume_mc(s, w, samples, args.seed, args.threads);
            const double z = std::abs(mc.value - exact.value) /
                             std::max(mc.stderr_v, 1e-300);
            worst_z = std::max(worst_z, z);
            ok = ok && z <= 3.0;
        }
        write_kv(out, "volume_mc.max_z", worst_z);
        record("volume_mc_agreement", ok);
    }
    // volume consistency across the reduced line integrals
    {
        double worst = 0.0;
        for (int m = 2; m <= s.n(); ++m) {
            const double r = 0.5 * (s.mu(m - 1) + s.mu(m));
            const ConePoint w{r, 1.0};
            const double full = volume(s, w);
            for (int i0 = 3; i0 <= s.n(); ++i0) {
                const double rec = reduced_volume_line_integral(s, i0, w, 0);
                worst = std::max(worst, std::abs(rec - full) / full);
            }
        }
        write_kv(out, "volume_consistency.max_rel", worst);
        record("volume_consistency", worst <= 1e-8);
    }
    // identities, monotonicity, bound on a grid
    {
        double worst_res = 0.0, worst_gap = 0.0, worst_slack = 0.0;
        for (int iu = 1; iu <= grid; ++iu) {
            const double u = double(iu) / double(grid);
            for (int it = 0; it < grid; ++it) {
                const double r =
                    1.0 + (double(it) + 0.5) / double(grid) * (s.lambda_max() - 1.0);
                const ConePoint w{u, u / r};
                const QVector q = qhat_eval(s, w);
                const auto [ru, rv] = identity_residuals(s, q, w);
                const double scale = std::max(w.u, 1.0);
                worst_res = std::max({worst_res, std::abs(ru) / scale, std::abs(rv) / scale});
                for (const double g : monotonicity_gaps(s, w))
                    worst_gap = std::max(worst_gap, -g / scale);
                for (int i = 2; i <= s.n(); ++i)
                    worst_slack =
                        std::max(worst_slack, -upper_bound_slack(s, w, i) / scale);
            }
        }
        write_kv(out, "identities.max_rel_residual", worst_res);
        write_kv(out, "monotonicity.max_violation", worst_gap);
        write_kv(out, "upper_bound.max_violation", worst_slack);
        record("identities", worst_res <= 1e-9);
        record("monotonicity", worst_gap <= 1e-9);
        record("upper_bound", worst_slack <= 1e-9);
    }
    // Lyapunov drift condition
    {
        const LyapunovParams p = choose_lyapunov(s, grid);
        const LyapunovReport rep = verify_lyapunov(s, p, grid);
        write_kv(out, "lyapunov.alpha0", p.alpha0);
        write_kv(out, "lyapunov.beta0", p.beta0);
        write_kv(out, "lyapunov.gamma0", p.gamma0);
        write_kv(out, "lyapunov.f0", p.f0);
        write_kv(out, "lyapunov.g0", p.g0);
        write_kv(out, "lyapunov.v0", p.v0);
        write_kv(out, "lyapunov.c_phi", p.c_phi);
        write_kv(out, "lyapunov.worst_outside", rep.worst_outside);
        write_kv(out, "lyapunov.worst_inside", rep.worst_inside);
        write_kv(out, "lyapunov.min_ratio", rep.min_ratio);
        record("lyapunov_drift", rep.drift_ok);
        record("lyapunov_bounds", rep.bounds_ok);
        record("lyapunov_ratio", rep.ratio_ok);
    }
    // stationary simulation, conservation, condensation
    {
        SimulateOptions opt;
        opt.dt = dt;
        opt.steps = steps;
        opt.seed = args.seed;
        opt.threads = args.threads;
        const StationaryStats st = simulate(s, mean_start_point(s), opt);
        write_stats(out, st);
        const ConservationReport cons = conservation_report(s, st);
        write_conservation(out, cons);
        record("conservation_2EU", cons.pass_u);
        record("conservation_2ESlq", cons.pass_slq);
        const CondensationReport cond = condensation_report(s, st);
        write_condensation(out, cond);
        record("condensation_bound", cond.all_pass);
        record("safeguard_rate", st.safeguard_rate < 1e-3);

        double delta = 0.0;
        if (s.equal_delta(&delta)) {
            double eu = 0.0, ev = 0.0;
            for (int ell = 1; ell <= s.N(); ++ell) {
                const double var = s.a() * (1.0 + delta) / 2.0;
                eu += var;
                ev += var / s.lambda(ell);
            }
            write_kv(out, "equal_delta.expected_u", eu);
            write_kv(out, "equal_delta.expected_v", ev);
            const bool pass_u = std::abs(st.mean_u - eu) <= std::max(3.0 * st.se_u, 0.02 * eu);
            const bool pass_v = std::abs(st.mean_v - ev) <= std::max(3.0 * st.se_v, 0.02 * ev);
            record("equal_delta_moments", pass_u && pass_v);
        } else {
            write_kv(out, "equal_delta.status", std::string("skipped: delta not constant"));
            std::cout << "SKIP equal_delta_moments (delta not constant)\n";
        }
    }

    write_kv(out, "all_pass", std::string(all_pass ? "yes" : "no"));
    out.close();
    man.write(fs::path(args.out) / "manifest.txt", {report_path.string()});
    std::cout << (all_pass ? "all checks passed" : "some checks FAILED") << ", report at "
              << report_path.string() << "\n";
    return all_pass ? 0 : 4;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"energy-enstrophy cone diffusion: exact q-functions, effective "
                 "generator, stationary checks"};
    app.require_subcommand(1);

    CommonArgs va;
    CLI::App* validate = app.add_subcommand("validate", "check a spectrum configuration");
    add_common(validate, &va, false);

    CommonArgs qa;
    int qtable_grid = 100;
    CLI::App* qtable = app.add_subcommand("qtable", "tabulate the conditional energies on a grid");
    add_common(qtable, &qa, true);
    qtable->add_option("--grid", qtable_grid, "grid resolution per axis");

    CommonArgs sa;
    double sim_dt = 1e-3;
    std::uint64_t sim_steps = 1'000'000, sim_burn = 0, dump_every = 1;
    int sim_traj = 1;
    bool dump = false, gzip = false;
    CLI::App* simulate_cmd =
        app.add_subcommand("simulate", "run the cone diffusion and report time averages");
    add_common(simulate_cmd, &sa, true);
    simulate_cmd->add_option("--dt", sim_dt, "time step");
    simulate_cmd->add_option("--steps", sim_steps, "steps per trajectory");
    simulate_cmd->add_option("--burn-in", sim_burn, "burn-in steps (default steps/10)");
    simulate_cmd->add_option("--trajectories", sim_traj, "independent trajectories");
    simulate_cmd->add_flag("--dump-trajectory", dump, "dump (step, t, u, v) of trajectory 0");
    simulate_cmd->add_flag("--gzip", gzip, "gzip-compress the trajectory dump");
    simulate_cmd->add_option("--dump-every", dump_every, "dump every k-th step");

    CommonArgs ve;
    std::uint64_t ver_samples = 200'000, ver_steps = 1'000'000;
    double ver_dt = 1e-3;
    int ver_grid = 24;
    CLI::App* verify_cmd =
        app.add_subcommand("verify", "run the full identity/drift/stationarity report");
    add_common(verify_cmd, &ve, true);
    verify_cmd->add_option("--samples", ver_samples, "Monte Carlo samples per volume check");
    verify_cmd->add_option("--steps", ver_steps, "simulation steps");
    verify_cmd->add_option("--dt", ver_dt, "simulation time step");
    verify_cmd->add_option("--grid", ver_grid, "grid resolution for identity and drift checks");

    CLI11_PARSE(app, argc, argv);

    try {
        if (validate->parsed()) return cmd_validate(va);
        if (qtable->parsed()) return cmd_qtable(qa, qtable_grid);
        if (simulate_cmd->parsed())
            return cmd_simulate(sa, sim_dt, sim_steps, sim_burn, sim_traj, dump, gzip,
                                dump_every);
        if (verify_cmd->parsed()) return cmd_verify(ve, ver_samples, ver_steps, ver_dt, ver_grid);
    } catch (const StepRejectedError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
