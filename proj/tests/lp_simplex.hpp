#pragma once

// Test-only dense transportation simplex. Solves
//   min sum_ij C[i][j] x[i][j]  s.t.  sum_j x[i][j] = a[i], sum_i x[i][j] = b[j]
// by northwest-corner start + MODI potential improvement. Independent of the
// library's quantile-merge and greedy-matching code paths on purpose; only
// meant for tiny instances (n, m <= 16).

#include <cmath>
#include <stdexcept>
#include <vector>

namespace testoracle {

inline double transport_simplex(std::vector<double> a, std::vector<double> b,
                                const std::vector<std::vector<double>>& C) {
    const int n = static_cast<int>(a.size());
    const int m = static_cast<int>(b.size());
    std::vector<std::vector<double>> x(n, std::vector<double>(m, 0.0));
    std::vector<std::vector<char>> basic(n, std::vector<char>(m, 0));

    // Northwest corner; on simultaneous exhaustion keep a zero basic cell so
    // the basis stays a spanning tree of n + m - 1 cells.
    {
        int i = 0, j = 0;
        double ra = a[0], rb = b[0];
        while (i < n && j < m) {
            double f = std::min(ra, rb);
            x[i][j] += f;
            basic[i][j] = 1;
            ra -= f;
            rb -= f;
            bool ia = ra <= 1e-15, ib = rb <= 1e-15;
            if (i == n - 1 && j == m - 1) break;
            if (ia && ib) {
                if (i + 1 < n) {
                    ++i;
                    ra = a[i];
                    basic[i][j] = 1;  // degenerate zero entry
                } else {
                    ++j;
                    rb = b[j];
                    basic[i][j] = 1;
                }
            } else if (ia) {
                ++i;
                ra = a[i];
            } else {
                ++j;
                rb = b[j];
            }
        }
    }

    const double NaN = std::nan("");
    for (int iter = 0; iter < 5000; ++iter) {
        // Potentials over the basis graph.
        std::vector<double> u(n, NaN), v(m, NaN);
        u[0] = 0.0;
        for (int pass = 0; pass < n + m; ++pass) {
            bool changed = false;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < m; ++j) {
                    if (!basic[i][j]) continue;
                    if (!std::isnan(u[i]) && std::isnan(v[j])) {
                        v[j] = C[i][j] - u[i];
                        changed = true;
                    } else if (std::isnan(u[i]) && !std::isnan(v[j])) {
                        u[i] = C[i][j] - v[j];
                        changed = true;
                    }
                }
            if (!changed) break;
        }
        // Degenerate basis may be disconnected; patch with a zero basic cell.
        bool patched = false;
        for (int i = 0; i < n && !patched; ++i) {
            if (!std::isnan(u[i])) continue;
            for (int j = 0; j < m && !patched; ++j)
                if (!std::isnan(v[j])) {
                    basic[i][j] = 1;
                    patched = true;
                }
        }
        for (int j = 0; j < m && !patched; ++j) {
            if (!std::isnan(v[j])) continue;
            for (int i = 0; i < n && !patched; ++i)
                if (!std::isnan(u[i])) {
                    basic[i][j] = 1;
                    patched = true;
                }
        }
        if (patched) continue;

        // Entering arc: most negative reduced cost.
        double best = -1e-12;
        int bi = -1, bj = -1;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j) {
                if (basic[i][j]) continue;
                double r = C[i][j] - u[i] - v[j];
                if (r < best) {
                    best = r;
                    bi = i;
                    bj = j;
                }
            }
        if (bi < 0) {
            double total = 0.0;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < m; ++j) total += C[i][j] * x[i][j];
            return total;
        }

        // Unique cycle: path from row bi to column bj through basic cells.
        // Nodes: rows 0..n-1, columns n..n+m-1.
        std::vector<int> parent(n + m, -2);
        std::vector<int> stack{bi};
        parent[bi] = -1;
        while (!stack.empty()) {
            int node = stack.back();
            stack.pop_back();
            if (node == n + bj) break;
            if (node < n) {
                for (int j = 0; j < m; ++j)
                    if (basic[node][j] && parent[n + j] == -2) {
                        parent[n + j] = node;
                        stack.push_back(n + j);
                    }
            } else {
                int j = node - n;
                for (int i = 0; i < n; ++i)
                    if (basic[i][j] && parent[i] == -2) {
                        parent[i] = node;
                        stack.push_back(i);
                    }
            }
        }
        if (parent[n + bj] == -2) throw std::runtime_error("transport_simplex: basis not connected");

        // Collect path cells alternating (row,col); signs alternate starting
        // with - on the first path cell (entering cell gets +).
        std::vector<std::pair<int, int>> cells;
        int node = n + bj;
        while (parent[node] != -1) {
            int p = parent[node];
            if (node >= n)
                cells.emplace_back(p, node - n);
            else
                cells.emplace_back(node, p - n);
            node = p;
        }
        // cells currently ordered from bj-end back to bi; reverse for clarity.
        std::vector<std::pair<int, int>> path(cells.rbegin(), cells.rend());

        double theta = 1e300;
        int li = -1, lj = -1;
        for (size_t k = 0; k < path.size(); k += 2) {
            auto [i, j] = path[k];
            if (x[i][j] < theta) {
                theta = x[i][j];
                li = i;
                lj = j;
            }
        }
        x[bi][bj] += theta;
        basic[bi][bj] = 1;
        for (size_t k = 0; k < path.size(); ++k) {
            auto [i, j] = path[k];
            if (k % 2 == 0)
                x[i][j] -= theta;
            else
                x[i][j] += theta;
        }
        basic[li][lj] = 0;
        x[li][lj] = 0.0;
    }
    throw std::runtime_error("transport_simplex: iteration cap hit");
}

}  // namespace testoracle
