#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <queue>
#include <utility>

#include "mlrel/classifier.hpp"
#include "mlrel/error.hpp"

namespace mlrel {

namespace {
constexpr std::size_t kLeafSize = 8;
}

struct KnnClassifier::Tree {
    struct Node {
        std::size_t begin = 0, end = 0;  // range into order
        std::size_t axis = 0;
        double split = 0.0;
        int left = -1, right = -1;
    };

    std::size_t dim;
    Metric metric;
    std::vector<double> coords;
    std::vector<std::size_t> order;
    std::vector<Node> nodes;

    using Candidate = std::pair<double, std::size_t>;  // (distance, index)

    Tree(const LabeledDataset& ds, Metric m) : dim(ds.dim()), metric(m), coords(ds.coords()) {
        order.resize(ds.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        build(0, order.size());
    }

    double at(std::size_t i, std::size_t a) const { return coords[i * dim + a]; }

    int build(std::size_t begin, std::size_t end) {
        const int id = static_cast<int>(nodes.size());
        nodes.push_back({begin, end});
        if (end - begin <= kLeafSize) return id;

        std::size_t axis = 0;
        double best_spread = -1.0;
        for (std::size_t a = 0; a < dim; ++a) {
            double lo = at(order[begin], a), hi = lo;
            for (std::size_t p = begin; p < end; ++p) {
                lo = std::min(lo, at(order[p], a));
                hi = std::max(hi, at(order[p], a));
            }
            if (hi - lo > best_spread) {
                best_spread = hi - lo;
                axis = a;
            }
        }
        if (best_spread <= 0.0) return id;  // all points coincide

        const std::size_t mid = begin + (end - begin) / 2;
        std::nth_element(order.begin() + begin, order.begin() + mid, order.begin() + end,
                         [&](std::size_t a, std::size_t b) { return at(a, axis) < at(b, axis); });
        const double split = at(order[mid], axis);
        nodes[id].axis = axis;
        nodes[id].split = split;
        const int l = build(begin, mid);
        const int r = build(mid, end);
        nodes[id].left = l;
        nodes[id].right = r;
        return id;
    }

    void search(int id, std::span<const double> x, std::size_t k,
                std::priority_queue<Candidate>& heap) const {
        const Node& node = nodes[id];
        if (node.left < 0) {
            for (std::size_t p = node.begin; p < node.end; ++p) {
                const std::size_t i = order[p];
                const double d = distance(x, {coords.data() + i * dim, dim}, metric);
                const Candidate c{d, i};
                if (heap.size() < k) {
                    heap.push(c);
                } else if (c < heap.top()) {
                    heap.pop();
                    heap.push(c);
                }
            }
            return;
        }
        // Points left of the median are <= split, right ones >= split.
        const double diff = x[node.axis] - node.split;
        const int near = diff < 0.0 ? node.left : node.right;
        const int far = diff < 0.0 ? node.right : node.left;
        search(near, x, k, heap);
        if (heap.size() < k || std::abs(diff) <= heap.top().first) search(far, x, k, heap);
    }
};

KnnClassifier::KnnClassifier(const LabeledDataset& ds, std::size_t k, Metric metric)
    : dim_(ds.dim()), k_(k), metric_(metric), labels_(ds.labels()) {
    if (ds.empty()) throw Error(ErrorCode::EmptyDataset, "cannot train on an empty dataset");
    if (k == 0 || k > ds.size())
        throw Error(ErrorCode::InvalidArgument, "k must be in [1, n]");
    tree_ = std::make_unique<Tree>(ds, metric);
}

KnnClassifier::~KnnClassifier() = default;
KnnClassifier::KnnClassifier(KnnClassifier&&) noexcept = default;
KnnClassifier& KnnClassifier::operator=(KnnClassifier&&) noexcept = default;

std::vector<std::size_t> KnnClassifier::neighbours(std::span<const double> x) const {
    std::priority_queue<Tree::Candidate> heap;
    tree_->search(0, x, k_, heap);
    std::vector<Tree::Candidate> found;
    while (!heap.empty()) {
        found.push_back(heap.top());
        heap.pop();
    }
    std::sort(found.begin(), found.end());
    std::vector<std::size_t> out;
    for (const auto& c : found) out.push_back(c.second);
    return out;
}

ClassId KnnClassifier::predict(std::span<const double> x) const {
    std::map<ClassId, std::size_t> votes;
    for (std::size_t i : neighbours(x)) ++votes[labels_[i]];
    ClassId best = votes.begin()->first;
    std::size_t best_count = 0;
    for (const auto& [label, count] : votes)  // ascending label order
        if (count > best_count) {
            best = label;
            best_count = count;
        }
    return best;
}

std::string KnnClassifier::name() const {
    return "knn(k=" + std::to_string(k_) + "," + std::string(to_string(metric_)) + ")";
}

std::unique_ptr<KnnClassifier> train_knn(const LabeledDataset& ds, std::size_t k, Metric metric) {
    return std::make_unique<KnnClassifier>(ds, k, metric);
}

}  // namespace mlrel
