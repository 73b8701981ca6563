#ifndef DGNN_CSR_HPP
#define DGNN_CSR_HPP

#include <string>
#include <vector>

#include "dgnn/error.hpp"

namespace dgnn {

/// Compressed sparse row matrix with double-typed values. Column indices
/// within each row are kept sorted so that reductions over a row have a
/// fixed order.
struct Csr {
    int rows = 0;
    int cols = 0;
    std::vector<int> row_ptr;  // size rows+1
    std::vector<int> col;      // size nnz
    std::vector<double> val;   // size nnz

    int nnz() const { return row_ptr.empty() ? 0 : row_ptr.back(); }

    void check_valid() const {
        if (static_cast<int>(row_ptr.size()) != rows + 1)
            throw ShapeError("csr: row_ptr size " + std::to_string(row_ptr.size()) +
                             " does not match rows " + std::to_string(rows));
        if (col.size() != val.size())
            throw ShapeError("csr: col/val length mismatch");
        for (int v = 0; v < rows; ++v) {
            if (row_ptr[v] > row_ptr[v + 1]) throw ShapeError("csr: row_ptr not monotone");
            for (int idx = row_ptr[v]; idx < row_ptr[v + 1]; ++idx) {
                if (col[idx] < 0 || col[idx] >= cols)
                    throw ShapeError("csr: column index out of range at row " + std::to_string(v));
                if (idx > row_ptr[v] && col[idx] <= col[idx - 1])
                    throw ShapeError("csr: columns not strictly ascending in row " +
                                     std::to_string(v));
            }
        }
    }
};

}  // namespace dgnn

#endif
