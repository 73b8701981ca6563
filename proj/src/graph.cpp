#include "dgnn/graph.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <unordered_map>

#include "json.hpp"

#include "dgnn/error.hpp"
#include "dgnn/rng.hpp"

namespace dgnn::graph {

namespace {

// Builds a deduplicated sorted CSR from a directed edge list; both
// directions must already be present for symmetric graphs.
Csr build_csr(int n, std::vector<std::pair<int, int>>& edges) {
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    Csr csr;
    csr.rows = n;
    csr.cols = n;
    csr.row_ptr.assign(n + 1, 0);
    for (const auto& [u, v] : edges) csr.row_ptr[u + 1]++;
    for (int i = 0; i < n; ++i) csr.row_ptr[i + 1] += csr.row_ptr[i];
    csr.col.reserve(edges.size());
    csr.val.assign(edges.size(), 1.0);
    for (const auto& [u, v] : edges) csr.col.push_back(v);
    return csr;
}

std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) out.push_back(std::move(tok));
    return out;
}

std::vector<std::string> split_char(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(sep, start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

double parse_double(const std::string& tok, const std::string& file, int line_no) {
    try {
        std::size_t used = 0;
        const double v = std::stod(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw FormatError(file + ":" + std::to_string(line_no) + ": cannot parse number '" + tok +
                          "'");
    }
}

int parse_int(const std::string& tok, const std::string& file, int line_no) {
    try {
        std::size_t used = 0;
        const int v = std::stoi(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw FormatError(file + ":" + std::to_string(line_no) + ": cannot parse integer '" +
                          tok + "'");
    }
}

std::ifstream open_or_throw(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    return in;
}

bool blank(const std::string& s) {
    return s.find_first_not_of(" \t\r\n") == std::string::npos;
}

}  // namespace

std::vector<int> indices_of(const std::vector<std::uint8_t>& mask) {
    std::vector<int> out;
    for (int i = 0; i < static_cast<int>(mask.size()); ++i)
        if (mask[i]) out.push_back(i);
    return out;
}

Graph load_content_cites(const std::string& content_path, const std::string& cites_path,
                         int* skipped_unknown) {
    Graph g;
    std::unordered_map<std::string, int> id_to_node;
    std::unordered_map<std::string, int> label_to_class;
    std::vector<std::vector<double>> rows;

    {
        std::ifstream in = open_or_throw(content_path);
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (blank(line)) continue;
            const auto toks = split_ws(line);
            if (toks.size() < 3)
                throw FormatError(content_path + ":" + std::to_string(line_no) +
                                  ": expected <id> <features...> <label>");
            const int d = static_cast<int>(toks.size()) - 2;
            if (g.d == 0) {
                g.d = d;
            } else if (d != g.d) {
                throw FormatError(content_path + ":" + std::to_string(line_no) + ": row has " +
                                  std::to_string(d) + " features, expected " +
                                  std::to_string(g.d));
            }
            if (!id_to_node.emplace(toks.front(), static_cast<int>(rows.size())).second)
                throw FormatError(content_path + ":" + std::to_string(line_no) +
                                  ": duplicate node id '" + toks.front() + "'");
            g.ids.push_back(toks.front());
            std::vector<double> feat(static_cast<std::size_t>(d));
            for (int j = 0; j < d; ++j) feat[j] = parse_double(toks[j + 1], content_path, line_no);
            rows.push_back(std::move(feat));
            const auto [it, inserted] =
                label_to_class.emplace(toks.back(), static_cast<int>(label_to_class.size()));
            g.y.push_back(it->second);
        }
    }
    if (rows.empty()) throw FormatError(content_path + ": no node lines");

    g.n = static_cast<int>(rows.size());
    g.num_classes = static_cast<int>(label_to_class.size());
    g.x.resize(static_cast<std::size_t>(g.n) * g.d);
    for (int i = 0; i < g.n; ++i)
        std::copy(rows[i].begin(), rows[i].end(), g.x.begin() + static_cast<std::size_t>(i) * g.d);

    std::vector<std::pair<int, int>> edges;
    int unknown = 0;
    {
        std::ifstream in = open_or_throw(cites_path);
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (blank(line)) continue;
            const auto toks = split_ws(line);
            if (toks.size() != 2)
                throw FormatError(cites_path + ":" + std::to_string(line_no) +
                                  ": expected <cited> <citing>");
            const auto a = id_to_node.find(toks[0]);
            const auto b = id_to_node.find(toks[1]);
            if (a == id_to_node.end() || b == id_to_node.end()) {
                ++unknown;
                continue;
            }
            if (a->second == b->second) continue;  // self-citation carries no structure
            edges.emplace_back(a->second, b->second);
            edges.emplace_back(b->second, a->second);
        }
    }
    if (skipped_unknown) {
        *skipped_unknown = unknown;
    } else if (unknown > 0) {
        std::cerr << "warning: skipped " << unknown << " cite lines with unknown node ids\n";
    }

    g.adj = build_csr(g.n, edges);
    g.train_mask.assign(g.n, 0);
    g.val_mask.assign(g.n, 0);
    g.test_mask.assign(g.n, 0);
    return g;
}

Graph load_generic(const std::string& dir) {
    namespace fs = std::filesystem;
    Graph g;

    const std::string feat_path = (fs::path(dir) / "features.csv").string();
    {
        std::ifstream in = open_or_throw(feat_path);
        std::string line;
        int line_no = 0;
        std::vector<std::vector<double>> rows;
        while (std::getline(in, line)) {
            ++line_no;
            if (blank(line)) continue;
            const auto toks = split_char(line, ',');
            if (g.d == 0) {
                g.d = static_cast<int>(toks.size());
            } else if (static_cast<int>(toks.size()) != g.d) {
                throw FormatError(feat_path + ":" + std::to_string(line_no) + ": row has " +
                                  std::to_string(toks.size()) + " columns, expected " +
                                  std::to_string(g.d));
            }
            std::vector<double> feat(toks.size());
            for (std::size_t j = 0; j < toks.size(); ++j)
                feat[j] = parse_double(toks[j], feat_path, line_no);
            rows.push_back(std::move(feat));
        }
        if (rows.empty()) throw FormatError(feat_path + ": no rows");
        g.n = static_cast<int>(rows.size());
        g.x.resize(static_cast<std::size_t>(g.n) * g.d);
        for (int i = 0; i < g.n; ++i)
            std::copy(rows[i].begin(), rows[i].end(),
                      g.x.begin() + static_cast<std::size_t>(i) * g.d);
    }

    const std::string label_path = (fs::path(dir) / "labels.csv").string();
    {
        std::ifstream in = open_or_throw(label_path);
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (blank(line)) continue;
            const int label = parse_int(line, label_path, line_no);
            if (label < 0) throw FormatError(label_path + ":" + std::to_string(line_no) +
                                             ": negative label");
            g.y.push_back(label);
            g.num_classes = std::max(g.num_classes, label + 1);
        }
        if (static_cast<int>(g.y.size()) != g.n)
            throw FormatError(label_path + ": " + std::to_string(g.y.size()) +
                              " labels for " + std::to_string(g.n) + " nodes");
    }

    const std::string edge_path = (fs::path(dir) / "edges.csv").string();
    std::vector<std::pair<int, int>> edges;
    {
        std::ifstream in = open_or_throw(edge_path);
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (blank(line)) continue;
            const auto toks = split_char(line, ',');
            if (toks.size() != 2)
                throw FormatError(edge_path + ":" + std::to_string(line_no) +
                                  ": expected two columns");
            const int u = parse_int(toks[0], edge_path, line_no);
            const int v = parse_int(toks[1], edge_path, line_no);
            if (u < 0 || u >= g.n || v < 0 || v >= g.n)
                throw FormatError(edge_path + ":" + std::to_string(line_no) +
                                  ": node index out of range");
            if (u == v) continue;
            edges.emplace_back(u, v);
            edges.emplace_back(v, u);
        }
    }
    g.adj = build_csr(g.n, edges);

    const std::string split_path = (fs::path(dir) / "splits.json").string();
    {
        std::ifstream in = open_or_throw(split_path);
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(split_path + ": " + e.what());
        }
        g.train_mask.assign(g.n, 0);
        g.val_mask.assign(g.n, 0);
        g.test_mask.assign(g.n, 0);
        std::vector<std::uint8_t> seen(static_cast<std::size_t>(g.n), 0);
        const std::array<std::pair<const char*, std::vector<std::uint8_t>*>, 3> split_keys{
            {{"train", &g.train_mask}, {"val", &g.val_mask}, {"test", &g.test_mask}}};
        for (const auto& [key, mask] : split_keys) {
            if (!j.contains(key) || !j[key].is_array())
                throw FormatError(split_path + ": missing array '" + key + "'");
            for (const auto& e : j[key]) {
                if (!e.is_number_integer())
                    throw FormatError(split_path + ": non-integer index in '" + key + "'");
                const int idx = e.get<int>();
                if (idx < 0 || idx >= g.n)
                    throw FormatError(split_path + ": index " + std::to_string(idx) +
                                      " out of range in '" + key + "'");
                if (seen[idx])
                    throw FormatError(split_path + ": index " + std::to_string(idx) +
                                      " appears in more than one split");
                seen[idx] = 1;
                (*mask)[idx] = 1;
            }
        }
    }

    g.ids.resize(g.n);
    for (int i = 0; i < g.n; ++i) g.ids[i] = std::to_string(i);
    return g;
}

void save_generic(const Graph& g, const std::string& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);

    auto open_out = [](const std::string& path) {
        std::ofstream out(path);
        if (!out) throw IoError("cannot write " + path);
        return out;
    };

    {
        std::ofstream out = open_out((fs::path(dir) / "features.csv").string());
        char buf[32];
        for (int i = 0; i < g.n; ++i) {
            for (int j = 0; j < g.d; ++j) {
                std::snprintf(buf, sizeof buf, "%.17g", g.x[static_cast<std::size_t>(i) * g.d + j]);
                if (j) out << ',';
                out << buf;
            }
            out << '\n';
        }
    }
    {
        std::ofstream out = open_out((fs::path(dir) / "labels.csv").string());
        for (int i = 0; i < g.n; ++i) out << g.y[i] << '\n';
    }
    {
        std::ofstream out = open_out((fs::path(dir) / "edges.csv").string());
        for (int u = 0; u < g.n; ++u)
            for (int idx = g.adj.row_ptr[u]; idx < g.adj.row_ptr[u + 1]; ++idx)
                if (u < g.adj.col[idx]) out << u << ',' << g.adj.col[idx] << '\n';
    }
    {
        nlohmann::json j;
        j["train"] = indices_of(g.train_mask);
        j["val"] = indices_of(g.val_mask);
        j["test"] = indices_of(g.test_mask);
        std::ofstream out = open_out((fs::path(dir) / "splits.json").string());
        out << j.dump(2) << '\n';
    }
}

NormalizedAdjacency normalize_adjacency(const Graph& g) {
    std::vector<double> inv_sqrt(static_cast<std::size_t>(g.n));
    for (int v = 0; v < g.n; ++v) inv_sqrt[v] = 1.0 / std::sqrt(g.degree(v) + 1.0);

    NormalizedAdjacency a;
    a.csr.rows = g.n;
    a.csr.cols = g.n;
    a.csr.row_ptr.assign(g.n + 1, 0);
    for (int v = 0; v < g.n; ++v) a.csr.row_ptr[v + 1] = a.csr.row_ptr[v] + g.degree(v) + 1;
    a.csr.col.resize(a.csr.row_ptr[g.n]);
    a.csr.val.resize(a.csr.row_ptr[g.n]);
    for (int v = 0; v < g.n; ++v) {
        int out = a.csr.row_ptr[v];
        bool self_done = false;
        for (int idx = g.adj.row_ptr[v]; idx < g.adj.row_ptr[v + 1]; ++idx) {
            const int u = g.adj.col[idx];
            if (!self_done && u > v) {  // insert the self-loop in sorted position
                a.csr.col[out] = v;
                a.csr.val[out] = inv_sqrt[v] * inv_sqrt[v];
                ++out;
                self_done = true;
            }
            a.csr.col[out] = u;
            a.csr.val[out] = inv_sqrt[v] * inv_sqrt[u];
            ++out;
        }
        if (!self_done) {
            a.csr.col[out] = v;
            a.csr.val[out] = inv_sqrt[v] * inv_sqrt[v];
        }
    }
    return a;
}

void generate_split(Graph& g, int per_class, int n_val, int n_test, std::uint64_t seed) {
    if (per_class < 0 || n_val < 0 || n_test < 0)
        throw ParamError("split sizes must be non-negative");
    const std::int64_t total =
        static_cast<std::int64_t>(per_class) * g.num_classes + n_val + n_test;
    if (total > g.n)
        throw ParamError("split sizes require " + std::to_string(total) + " nodes, graph has " +
                         std::to_string(g.n));

    Rng rng(seed);
    g.train_mask.assign(g.n, 0);
    g.val_mask.assign(g.n, 0);
    g.test_mask.assign(g.n, 0);

    std::vector<std::vector<int>> by_class(static_cast<std::size_t>(g.num_classes));
    for (int v = 0; v < g.n; ++v) by_class[g.y[v]].push_back(v);
    for (int c = 0; c < g.num_classes; ++c) {
        auto& nodes = by_class[c];
        if (static_cast<int>(nodes.size()) < per_class)
            throw ParamError("class " + std::to_string(c) + " has " +
                             std::to_string(nodes.size()) + " nodes, need " +
                             std::to_string(per_class) + " for the train split");
        rng.shuffle(nodes);
        for (int i = 0; i < per_class; ++i) g.train_mask[nodes[i]] = 1;
    }

    std::vector<int> rest;
    rest.reserve(g.n);
    for (int v = 0; v < g.n; ++v)
        if (!g.train_mask[v]) rest.push_back(v);
    rng.shuffle(rest);
    for (int i = 0; i < n_val; ++i) g.val_mask[rest[i]] = 1;
    for (int i = 0; i < n_test; ++i) g.test_mask[rest[n_val + i]] = 1;
}

Graph mask_features(const Graph& g) {
    Graph out = g;
    for (int v = 0; v < g.n; ++v) {
        if (out.val_mask[v] || out.test_mask[v]) {
            auto* row = out.x.data() + static_cast<std::size_t>(v) * out.d;
            std::fill(row, row + out.d, 0.0);
        }
    }
    return out;
}

}  // namespace dgnn::graph
