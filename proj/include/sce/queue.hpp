#pragma once

#include "sce/tensor.hpp"

namespace sce {

// Fixed-capacity FIFO ring of l2-normalized target embeddings. After
// pushing more rows than the capacity, the contents are exactly the last
// `capacity` rows pushed, in age order.
class MemoryQueue {
public:
    MemoryQueue(long capacity, long dim);

    void push(const Tensor& rows);  // rows: K x dim, unit norm

    long capacity() const { return capacity_; }
    long dim() const { return dim_; }
    long fill() const { return fill_; }
    long cursor() const { return cursor_; }
    bool full() const { return fill_ == capacity_; }

    // Stored rows in ring order (for similarity computations; order is
    // irrelevant there). Only valid once full.
    const Tensor& storage() const { return rows_; }
    Tensor snapshot() const;              // fill x dim, ring storage order
    Tensor contents_in_age_order() const; // fill x dim, oldest first

    void restore(Tensor rows, long fill, long cursor);

private:
    Tensor rows_;
    long capacity_ = 0, dim_ = 0, fill_ = 0, cursor_ = 0;
};

}  // namespace sce
