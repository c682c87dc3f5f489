#include "sce/queue.hpp"

#include <cmath>

namespace sce {

MemoryQueue::MemoryQueue(long capacity, long dim)
    : rows_(Tensor::zeros({capacity, dim})), capacity_(capacity), dim_(dim) {
    SCE_CHECK(capacity >= 1 && dim >= 1, "queue needs positive capacity and dim");
}

void MemoryQueue::push(const Tensor& rows) {
    SCE_CHECK(rows.ndim() == 2 && rows.cols() == dim_, "queue push: rows must be K x ", dim_);
    for (long i = 0; i < rows.rows(); ++i) {
        double sq = 0.0;
        for (long j = 0; j < dim_; ++j) sq += rows.at(i, j) * rows.at(i, j);
        SCE_CHECK(std::abs(std::sqrt(sq) - 1.0) <= 1e-9, "queue push: row ", i, " not unit norm");
        for (long j = 0; j < dim_; ++j) rows_.at(cursor_, j) = rows.at(i, j);
        cursor_ = (cursor_ + 1) % capacity_;
        if (fill_ < capacity_) ++fill_;
    }
}

Tensor MemoryQueue::snapshot() const {
    Tensor out = Tensor::zeros({fill_ > 0 ? fill_ : 1, dim_});
    SCE_CHECK(fill_ > 0, "queue snapshot: queue is empty");
    for (long i = 0; i < fill_; ++i)
        for (long j = 0; j < dim_; ++j) out.at(i, j) = rows_.at(i, j);
    return out;
}

Tensor MemoryQueue::contents_in_age_order() const {
    SCE_CHECK(fill_ > 0, "queue contents: queue is empty");
    Tensor out = Tensor::zeros({fill_, dim_});
    // When not yet full, rows 0..fill-1 are already in age order; once
    // full, the oldest row sits at the cursor.
    const long start = full() ? cursor_ : 0;
    for (long i = 0; i < fill_; ++i) {
        const long src = (start + i) % capacity_;
        for (long j = 0; j < dim_; ++j) out.at(i, j) = rows_.at(src, j);
    }
    return out;
}

void MemoryQueue::restore(Tensor rows, long fill, long cursor) {
    SCE_CHECK(rows.ndim() == 2 && rows.rows() == capacity_ && rows.cols() == dim_,
              "queue restore: storage shape mismatch");
    SCE_CHECK(fill >= 0 && fill <= capacity_ && cursor >= 0 && cursor < capacity_,
              "queue restore: bad fill/cursor");
    rows_ = std::move(rows);
    fill_ = fill;
    cursor_ = cursor;
}

}  // namespace sce
