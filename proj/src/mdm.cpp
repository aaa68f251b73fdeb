#include "ringsim/mdm.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace ringsim {

void InterferometerModel::validate() const
{
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("interferometer alpha must lie in [0, 1]");
    if (!(dL > 0.0) || !std::isfinite(dL)) throw std::invalid_argument("interferometer dL must be positive");
}

double interferometer_transmission(const InterferometerModel& m, double lam)
{
    m.validate();
    if (!(lam > 0.0)) throw std::invalid_argument("wavelength must be positive");
    const double a = m.alpha;
    return a * a + (1.0 - a) * (1.0 - a) - 2.0 * a * (1.0 - a) * std::cos(2.0 * std::numbers::pi * m.dL / lam);
}

Spectrum interferometer_spectrum(const InterferometerModel& m, Window w, double spacing, double pump_mW,
                                 double noise_db, std::uint64_t seed)
{
    m.validate();
    if (!(spacing > 0.0)) throw std::invalid_argument("spacing must be positive");
    if (!(w.low > 0.0) || !(w.high > w.low)) throw std::invalid_argument("window is empty or nonpositive");
    if (!(pump_mW > 0.0)) throw std::invalid_argument("pump power must be positive");
    if (noise_db < 0.0) throw std::invalid_argument("noise amplitude must be >= 0");
    const auto n = static_cast<std::size_t>(std::floor((w.high - w.low) / spacing + 1e-9)) + 1;
    const auto noise = pink_noise(n, noise_db, seed);
    Spectrum s;
    s.start = w.low;
    s.spacing = spacing;
    s.power.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        s.power[i] = mw_to_dbm(pump_mW * interferometer_transmission(m, s.wavelength(i))) + noise[i];
    return s;
}

namespace {

struct Projection {
    Eigen::Vector3d coef;
    double ss = 0.0;
};

// Best offset/cos/sin combination at a fixed frequency in u = 1/lam.
Projection project(const Eigen::VectorXd& u, const Eigen::VectorXd& y, double freq)
{
    const Eigen::Index n = u.size();
    Eigen::MatrixXd A(n, 3);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double th = 2.0 * std::numbers::pi * freq * u[i];
        A(i, 0) = 1.0;
        A(i, 1) = std::cos(th);
        A(i, 2) = std::sin(th);
    }
    Projection p;
    p.coef = A.colPivHouseholderQr().solve(y);
    p.ss = (A * p.coef - y).squaredNorm();
    return p;
}

} // namespace

SinusoidFit fit_sinusoid(const Spectrum& s)
{
    s.validate();
    if (s.size() < 8) throw NonSinusoidal("spectrum too short for a sinusoid fit");
    const auto lin = s.linear();
    const auto lam = s.wavelengths();
    const std::size_t n = lin.size();

    Eigen::VectorXd u(static_cast<Eigen::Index>(n)), y(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        u[static_cast<Eigen::Index>(i)] = 1.0 / lam[i];
        y[static_cast<Eigen::Index>(i)] = lin[i];
    }
    const double mean = y.mean();
    const double sd = std::sqrt((y.array() - mean).square().mean());

    SinusoidFit f;
    f.offset = mean;
    if (sd <= 1e-9 * std::abs(mean)) return f;

    // Uniform grid in u, ascending: u runs from 1/stop to 1/start.
    const double u0 = 1.0 / s.stop();
    const double u1 = 1.0 / s.start;
    const double span = u1 - u0;
    const double du = span / static_cast<double>(n - 1);
    std::vector<double> grid(n * 4, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        const double uk = u0 + du * static_cast<double>(k);
        grid[k] = s.at(1.0 / uk);
    }
    for (std::size_t k = 0; k < n; ++k) grid[k] = dbm_to_mw(grid[k]);
    double gm = 0.0;
    for (std::size_t k = 0; k < n; ++k) gm += grid[k];
    gm /= static_cast<double>(n);
    for (std::size_t k = 0; k < n; ++k) grid[k] -= gm;

    const auto ps = power_spectrum(grid);
    std::size_t peak = 1;
    for (std::size_t k = 2; k < ps.size(); ++k)
        if (ps[k] > ps[peak]) peak = k;
    const double f0 = static_cast<double>(peak) / (static_cast<double>(grid.size()) * du);

    // Golden-section search of the projected residual around the FFT peak.
    const double half = 0.5 / span;
    double a = std::max(f0 - half, 0.0), b = f0 + half;
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - gr * (b - a), d = a + gr * (b - a);
    double fc = project(u, y, c).ss, fd = project(u, y, d).ss;
    for (int it = 0; it < 100 && (b - a) > 1e-12 * f0; ++it) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = project(u, y, c).ss;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = project(u, y, d).ss;
        }
    }
    f.freq = 0.5 * (a + b);
    const auto p = project(u, y, f.freq);
    f.offset = p.coef[0];
    f.amplitude = std::hypot(p.coef[1], p.coef[2]);
    f.phase = std::atan2(-p.coef[2], p.coef[1]);
    f.residual_rms = std::sqrt(p.ss / static_cast<double>(n));

    if (f.freq * span < 3.0) throw NonSinusoidal("spectrum spans fewer than three oscillation periods");
    if (f.residual_rms > 0.2 * f.amplitude)
        throw NonSinusoidal("sinusoid fit residual exceeds 20% of the amplitude");
    return f;
}

double extinction_ratio(const SinusoidFit& f)
{
    if (!(f.offset > 0.0)) throw NonSinusoidal("fitted offset is not positive");
    const double amp = std::abs(f.amplitude);
    if (amp <= 1e-9 * f.offset) return 0.0;
    const double hi = f.offset + amp;
    const double lo = std::max(f.offset - amp, 1e-3 * f.offset);
    return 10.0 * std::log10(hi / lo);
}

double extinction_ratio(const Spectrum& s) { return extinction_ratio(fit_sinusoid(s)); }

std::pair<double, double> alpha_from_er(double er_db)
{
    if (!(er_db >= 0.0) || !std::isfinite(er_db)) throw std::invalid_argument("extinction ratio must be finite and >= 0");
    const double r = std::pow(10.0, -er_db / 10.0); // (1 - 2 alpha)^2
    const double a = 0.5 * (1.0 - std::sqrt(r));
    return {a, 1.0 - a};
}

std::vector<CouplingRow> coupling_report(const std::vector<SweepEntry>& sweep)
{
    std::vector<CouplingRow> ok, failed;
    for (const auto& e : sweep) {
        CouplingRow row;
        row.width = e.width;
        row.length = e.length;
        if (!e.spectrum) {
            row.error = e.error.empty() ? "no spectrum" : e.error;
            failed.push_back(row);
            continue;
        }
        try {
            row.er_db = extinction_ratio(*e.spectrum);
            std::tie(row.alpha_low, row.alpha_high) = alpha_from_er(row.er_db);
            row.ok = true;
            ok.push_back(row);
        } catch (const std::exception& ex) {
            row.error = ex.what();
            failed.push_back(row);
        }
    }
    std::stable_sort(ok.begin(), ok.end(), [](const auto& x, const auto& y) { return x.er_db > y.er_db; });
    ok.insert(ok.end(), failed.begin(), failed.end());
    return ok;
}

namespace {

bool parse_double(std::string_view t, double& out)
{
    while (!t.empty() && std::isspace(static_cast<unsigned char>(t.front()))) t.remove_prefix(1);
    while (!t.empty() && std::isspace(static_cast<unsigned char>(t.back()))) t.remove_suffix(1);
    if (t.empty()) return false;
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
    return ec == std::errc() && p == t.data() + t.size();
}

} // namespace

Spectrum read_spectrum_csv(const std::filesystem::path& file)
{
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot open " + file.string());
    std::vector<double> lam, p;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const auto comma = line.find(',');
        double a = 0.0, b = 0.0;
        if (comma == std::string::npos || !parse_double(std::string_view(line).substr(0, comma), a) ||
            !parse_double(std::string_view(line).substr(comma + 1), b)) {
            if (lam.empty() && lineno == 1) continue; // header
            throw std::runtime_error(file.string() + ":" + std::to_string(lineno) + ": expected 'nm,dBm'");
        }
        lam.push_back(a);
        p.push_back(b);
    }
    if (lam.size() < 2) throw std::runtime_error(file.string() + ": fewer than two samples");
    const double spacing = (lam.back() - lam.front()) / static_cast<double>(lam.size() - 1);
    if (!(spacing > 0.0)) throw std::runtime_error(file.string() + ": wavelengths must increase");
    for (std::size_t i = 1; i < lam.size(); ++i)
        if (std::abs(lam[i] - lam[i - 1] - spacing) > 1e-3 * spacing)
            throw std::runtime_error(file.string() + ": wavelength grid is not uniform");
    Spectrum s;
    s.start = lam.front();
    s.spacing = spacing;
    s.power = std::move(p);
    s.validate();
    return s;
}

std::vector<SweepEntry> read_sweep_directory(const std::filesystem::path& dir)
{
    if (!std::filesystem::is_directory(dir)) throw std::runtime_error("not a directory: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
    std::sort(files.begin(), files.end());

    std::vector<SweepEntry> out;
    for (const auto& f : files) {
        const std::string stem = f.stem().string();
        const auto us = stem.find('_');
        SweepEntry e;
        if (us == std::string::npos || !parse_double(std::string_view(stem).substr(0, us), e.width) ||
            !parse_double(std::string_view(stem).substr(us + 1), e.length))
            continue;
        try {
            e.spectrum = read_spectrum_csv(f);
        } catch (const std::exception& ex) {
            e.error = ex.what();
        }
        out.push_back(std::move(e));
    }
    return out;
}

void check_unitary(const ComplexMatrix& M, double tol)
{
    if (M.rows() == 0 || M.rows() != M.cols()) throw NonUnitary("mixing matrix must be square and non-empty");
    const double dev = (M * M.adjoint() - ComplexMatrix::Identity(M.rows(), M.cols())).cwiseAbs().maxCoeff();
    if (!(dev <= tol)) {
        std::ostringstream os;
        os << "mixing matrix is not unitary (max |M M^H - I| = " << dev << ")";
        throw NonUnitary(os.str());
    }
}

ComplexVector compensate_mixing(const ComplexMatrix& M, const ComplexVector& desired)
{
    check_unitary(M);
    if (desired.size() != M.cols()) throw std::invalid_argument("desired weight vector size does not match mixing matrix");
    return M.adjoint() * desired;
}

} // namespace ringsim
