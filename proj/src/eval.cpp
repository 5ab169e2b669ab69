#include "afnio/eval.hpp"

#include <atomic>
#include <cmath>
#include <functional>
#include <map>
#include <thread>

#include "afnio/metrics.hpp"

namespace afnio {

namespace {

int anchor_gap(int drop) {
    int g = 1;
    while (g < drop + 1) g *= 2;
    return g;
}

// Runs fn(i) over [0, n) on `threads` workers; results land in
// caller-provided storage indexed by i, so the reduction order is fixed.
void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
    threads = std::max(1, threads);
    if (threads == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    for (int t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            NoGradGuard ng;
            for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
        });
    for (auto& th : pool) th.join();
}

}  // namespace

bool model_admits(const AdaFNIO<float>& model, int H, int W, std::string* why) {
    if (model.nio && !model.cfg.nio.admissible(H, W, why)) return false;
    if (model.ada && (H % 8 != 0 || W % 8 != 0)) {
        if (why) *why = "adacof pathway needs sides divisible by 8";
        return false;
    }
    return true;
}

DropScore eval_drop(const AdaFNIO<float>& model, const std::vector<std::vector<Tensor<float>>>& sequences, int drop,
                    int threads) {
    if (drop < 1) throw std::invalid_argument("eval_drop: drop must be >= 1");
    const int gap = anchor_gap(drop);

    struct SeqScore {
        double psum = 0, ssum = 0;
        int frames = 0;
        bool skipped = false;
    };
    std::vector<SeqScore> scores(sequences.size());

    parallel_for(static_cast<int>(sequences.size()), threads, [&](int si) {
        NoGradGuard ng;
        const auto& seq = sequences[static_cast<size_t>(si)];
        auto& sc = scores[static_cast<size_t>(si)];
        if (static_cast<int>(seq.size()) < gap + 1) {
            sc.skipped = true;
            return;
        }
        for (int a = 0; a + gap < static_cast<int>(seq.size()); a += gap) {
            std::map<int, Tensor<float>> frames;  // anchors + predictions
            frames[a] = seq[static_cast<size_t>(a)];
            frames[a + gap] = seq[static_cast<size_t>(a + gap)];
            std::function<void(int, int)> fill = [&](int lo, int hi) {
                if (hi - lo < 2) return;
                int mid = (lo + hi) / 2;
                frames[mid] = model.forward(frames.at(lo), frames.at(hi));
                fill(lo, mid);
                fill(mid, hi);
            };
            fill(a, a + gap);
            for (int t = a + 1; t <= a + drop; ++t) {
                sc.psum += psnr(frames.at(t), seq[static_cast<size_t>(t)]);
                sc.ssum += ssim(frames.at(t), seq[static_cast<size_t>(t)]);
                ++sc.frames;
            }
        }
    });

    DropScore out;
    out.drop = drop;
    for (const auto& sc : scores) {
        if (sc.skipped) {
            ++out.sequences_skipped;
            continue;
        }
        out.mean_psnr += sc.psum;
        out.mean_ssim += sc.ssum;
        out.frames_scored += sc.frames;
    }
    if (out.frames_scored > 0) {
        out.mean_psnr /= out.frames_scored;
        out.mean_ssim /= out.frames_scored;
    }
    return out;
}

std::vector<ResolutionRow> eval_resolutions(const AdaFNIO<float>& model, const SyntheticSpec& spec,
                                            const std::vector<int>& resolutions, int count, int threads) {
    std::vector<ResolutionRow> rows;
    for (int res : resolutions) {
        ResolutionRow row;
        row.resolution = res;
        if (!model_admits(model, res, res)) {
            row.admissible = false;
            rows.push_back(row);
            continue;
        }
        std::vector<double> psnrs(static_cast<size_t>(count)), ssims(static_cast<size_t>(count));
        parallel_for(count, threads, [&](int i) {
            NoGradGuard ng;
            SynthItem item = make_synth_item(spec, i);
            auto first = synth_frame(item, 0.0, res);
            auto middle = synth_frame(item, 1.0, res);
            auto last = synth_frame(item, 2.0, res);
            auto pred = model.forward(first, last);
            psnrs[static_cast<size_t>(i)] = psnr(pred, middle);
            ssims[static_cast<size_t>(i)] = ssim(pred, middle);
        });
        for (int i = 0; i < count; ++i) {
            row.mean_psnr += psnrs[static_cast<size_t>(i)];
            row.mean_ssim += ssims[static_cast<size_t>(i)];
        }
        if (count > 0) {
            row.mean_psnr /= count;
            row.mean_ssim /= count;
        }
        row.count = count;
        rows.push_back(row);
    }
    return rows;
}

}  // namespace afnio
