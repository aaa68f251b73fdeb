#include "ringsim/cli.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace ringsim {

std::string sha256_hex(const std::string& bytes)
{
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("SHA-256 digest failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[md[i] >> 4]);
        out.push_back(hex[md[i] & 15]);
    }
    return out;
}

std::string fmt_num(double v)
{
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (v == 0.0) return "0";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

namespace {

std::string short_num(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

std::string xml_escape(const std::string& s)
{
    std::string o;
    for (char c : s) {
        switch (c) {
        case '&': o += "&amp;"; break;
        case '<': o += "&lt;"; break;
        case '>': o += "&gt;"; break;
        case '"': o += "&quot;"; break;
        default: o += c;
        }
    }
    return o;
}

std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

} // namespace

void CsvTable::add(const std::vector<double>& values)
{
    std::vector<std::string> r;
    for (double v : values) r.push_back(fmt_num(v));
    rows.push_back(std::move(r));
}

std::string CsvTable::str() const
{
    std::string s;
    for (std::size_t i = 0; i < header.size(); ++i) s += (i ? "," : "") + header[i];
    s += '\n';
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.size(); ++i) s += (i ? "," : "") + r[i];
        s += '\n';
    }
    return s;
}

std::vector<double> CsvTable::column(const std::string& name) const
{
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw std::invalid_argument("no column '" + name + "'");
    const auto k = static_cast<std::size_t>(it - header.begin());
    std::vector<double> out;
    for (const auto& r : rows) out.push_back(k < r.size() ? std::strtod(r[k].c_str(), nullptr) : std::nan(""));
    return out;
}

CsvTable CsvTable::parse(const std::string& text)
{
    CsvTable t;
    std::istringstream in(text);
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        auto cells = split_csv_line(line);
        if (first) {
            t.header = std::move(cells);
            first = false;
        } else {
            t.rows.push_back(std::move(cells));
        }
    }
    if (t.header.empty()) throw std::invalid_argument("empty CSV");
    return t;
}

CsvTable grid_table(const std::vector<double>& xs, const std::vector<double>& ys,
                    const std::vector<std::vector<double>>& z)
{
    CsvTable t;
    t.header.push_back("y\\x");
    for (double x : xs) t.header.push_back(fmt_num(x));
    for (std::size_t j = 0; j < ys.size(); ++j) {
        std::vector<double> row{ys[j]};
        for (std::size_t i = 0; i < xs.size(); ++i) row.push_back(z[i][j]);
        t.add(row);
    }
    return t;
}

std::string svg_line_chart(const std::string& title, const std::string& xlabel, const std::vector<double>& x,
                           const std::vector<Series>& series)
{
    const double W = 720, H = 440, L = 70, R = 160, T = 40, B = 50;
    double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    bool any = false;
    for (const auto& s : series)
        for (std::size_t i = 0; i < std::min(x.size(), s.y.size()); ++i) {
            if (!std::isfinite(x[i]) || !std::isfinite(s.y[i])) continue;
            if (!any) {
                x0 = x1 = x[i];
                y0 = y1 = s.y[i];
                any = true;
            }
            x0 = std::min(x0, x[i]);
            x1 = std::max(x1, x[i]);
            y0 = std::min(y0, s.y[i]);
            y1 = std::max(y1, s.y[i]);
        }
    if (x1 == x0) x1 = x0 + 1;
    if (y1 == y0) y1 = y0 + 1;
    const double pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;
    auto px = [&](double v) { return L + (v - x0) / (x1 - x0) * (W - L - R); };
    auto py = [&](double v) { return H - B - (v - y0) / (y1 - y0) * (H - T - B); };

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << xml_escape(title) << "</text>\n";
    o << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
      << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double xv = x0 + (x1 - x0) * k / 4.0, yv = y0 + (y1 - y0) * k / 4.0;
        o << "<text x=\"" << px(xv) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << short_num(xv) << "</text>\n";
        o << "<text x=\"" << L - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << short_num(yv) << "</text>\n";
    }
    o << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">" << xml_escape(xlabel) << "</text>\n";
    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* col = kPalette[s % std::size(kPalette)];
        o << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < std::min(x.size(), series[s].y.size()); ++i)
            if (std::isfinite(x[i]) && std::isfinite(series[s].y[i]))
                o << short_num(px(x[i])) << ',' << short_num(py(series[s].y[i])) << ' ';
        o << "\"/>\n";
        const double ly = T + 16 + 18.0 * static_cast<double>(s);
        o << "<line x1=\"" << W - R + 12 << "\" y1=\"" << ly - 4 << "\" x2=\"" << W - R + 32 << "\" y2=\"" << ly - 4
          << "\" stroke=\"" << col << "\" stroke-width=\"2\"/>\n";
        o << "<text x=\"" << W - R + 38 << "\" y=\"" << ly << "\">" << xml_escape(series[s].name) << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

std::string svg_heatmap(const std::string& title, const std::vector<double>& xs, const std::vector<double>& ys,
                        const std::vector<std::vector<double>>& z)
{
    const double cell = 14, L = 60, T = 40;
    const double W = L + cell * static_cast<double>(xs.size()) + 30;
    const double H = T + cell * static_cast<double>(ys.size()) + 50;
    double zmax = 0.0;
    for (const auto& r : z)
        for (double v : r)
            if (std::isfinite(v)) zmax = std::max(zmax, std::abs(v));
    if (zmax == 0.0) zmax = 1.0;

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << xml_escape(title) << "</text>\n";
    for (std::size_t i = 0; i < xs.size() && i < z.size(); ++i)
        for (std::size_t j = 0; j < ys.size() && j < z[i].size(); ++j) {
            const double t = std::clamp(z[i][j] / zmax, -1.0, 1.0);
            const int fade = static_cast<int>(std::lround(255.0 * (1.0 - std::abs(t))));
            char col[8];
            if (t >= 0)
                std::snprintf(col, sizeof col, "#ff%02x%02x", fade, fade);
            else
                std::snprintf(col, sizeof col, "#%02x%02xff", fade, fade);
            const double yy = T + cell * static_cast<double>(ys.size() - 1 - j);
            o << "<rect x=\"" << L + cell * static_cast<double>(i) << "\" y=\"" << yy << "\" width=\"" << cell
              << "\" height=\"" << cell << "\" fill=\"" << col << "\"/>\n";
        }
    if (!xs.empty() && !ys.empty()) {
        o << "<text x=\"" << L << "\" y=\"" << H - 28 << "\">" << short_num(xs.front()) << "</text>\n";
        o << "<text x=\"" << L + cell * static_cast<double>(xs.size()) << "\" y=\"" << H - 28 << "\" text-anchor=\"end\">"
          << short_num(xs.back()) << "</text>\n";
        o << "<text x=\"" << L - 6 << "\" y=\"" << T + cell * static_cast<double>(ys.size()) << "\" text-anchor=\"end\">"
          << short_num(ys.front()) << "</text>\n";
        o << "<text x=\"" << L - 6 << "\" y=\"" << T + 10 << "\" text-anchor=\"end\">" << short_num(ys.back()) << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

ArtifactWriter::ArtifactWriter(std::filesystem::path dir) : dir_(std::move(dir))
{
    std::filesystem::create_directories(dir_);
}

void ArtifactWriter::write(const std::string& rel, const std::string& content)
{
    const auto path = dir_ / rel;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
    if (!out) throw std::runtime_error("write failed: " + path.string());
    files_.emplace_back(rel, sha256_hex(content));
}

void ArtifactWriter::finish(const nlohmann::json& summary)
{
    nlohmann::json m;
    m["artifacts"] = nlohmann::json::array();
    for (const auto& [p, h] : files_) m["artifacts"].push_back({{"path", p}, {"sha256", h}});
    m["summary"] = summary;
    std::ofstream out(dir_ / "manifest.json", std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write manifest");
    out << m.dump(2) << '\n';
}

} // namespace ringsim
