#include "vva/tracking.hpp"

#include "vva/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace vva {

KeyframePolicy KeyframePolicy::parse(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) throw InvalidArgument("keyframe policy '" + text + "' must look like every_nth:N or scored:N");
    const std::string mode = text.substr(0, colon);
    KeyframePolicy p;
    if (mode == "every_nth")
        p.mode = Mode::EveryNth;
    else if (mode == "scored")
        p.mode = Mode::Scored;
    else
        throw InvalidArgument("unknown keyframe policy '" + mode + "'");
    try {
        std::size_t used = 0;
        p.n = std::stoi(text.substr(colon + 1), &used);
        if (used != text.size() - colon - 1) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
        throw InvalidArgument("keyframe policy '" + text + "' has a bad frame count");
    }
    p.validate();
    return p;
}

std::string KeyframePolicy::to_string() const {
    return std::string(mode == Mode::EveryNth ? "every_nth:" : "scored:") + std::to_string(n);
}

void KeyframePolicy::validate() const {
    if (n < 1) throw InvalidArgument("keyframe policy: n must be >= 1");
    if (w_area < 0.0 || w_genus < 0.0) throw InvalidArgument("keyframe policy: weights must be >= 0");
}

int scoring_genus(const TriMesh& mesh) {
    int g = 0;
    for (const ComponentGenus& c : genus_per_component(mesh)) g += c.genus ? *c.genus : 1;
    return g;
}

std::vector<FrameGroup> group_by_keyframes(const std::vector<std::size_t>& keyframes, std::size_t frame_count) {
    std::vector<FrameGroup> groups;
    if (frame_count == 0) return groups;
    for (std::size_t i = 0; i < keyframes.size(); ++i) {
        FrameGroup g;
        g.keyframe = keyframes[i];
        // Frame f belongs to keyframe i when it is strictly closer than to
        // i-1 and no farther than to i+1.
        g.first = i == 0 ? 0 : (keyframes[i - 1] + keyframes[i]) / 2 + 1;
        g.last = i + 1 == keyframes.size() ? frame_count - 1 : (keyframes[i] + keyframes[i + 1]) / 2;
        groups.push_back(g);
    }
    return groups;
}

std::vector<FrameGroup> select_keyframes(const std::vector<double>& areas, const std::vector<int>& genus,
                                         const KeyframePolicy& policy) {
    policy.validate();
    const std::size_t n = areas.size();
    if (n == 0) throw InvalidArgument("select_keyframes: empty sequence");
    if (genus.size() != n) throw InvalidArgument("select_keyframes: genus count does not match frame count");
    std::vector<std::size_t> keys;
    const std::size_t step = static_cast<std::size_t>(policy.n);
    for (std::size_t start = 0; start < n; start += step) {
        if (policy.mode == KeyframePolicy::Mode::EveryNth) {
            keys.push_back(start);
            continue;
        }
        const std::size_t end = std::min(n, start + step);
        double mean = 0.0;
        for (std::size_t f = start; f < end; ++f) mean += areas[f];
        mean /= static_cast<double>(end - start);
        double var = 0.0;
        for (std::size_t f = start; f < end; ++f) var += (areas[f] - mean) * (areas[f] - mean);
        const double sd = std::sqrt(var / static_cast<double>(end - start));
        std::size_t best = start;
        double best_score = -std::numeric_limits<double>::infinity();
        for (std::size_t f = start; f < end; ++f) {
            const double z = sd > 0.0 ? (areas[f] - mean) / sd : 0.0;
            const double score = policy.w_area * z - policy.w_genus * genus[f];
            if (score > best_score) {
                best_score = score;
                best = f;
            }
        }
        keys.push_back(best);
    }
    return group_by_keyframes(keys, n);
}

std::vector<FrameGroup> select_keyframes(const MeshSequence& seq, const KeyframePolicy& policy) {
    std::vector<double> areas(seq.size(), 0.0);
    std::vector<int> genus(seq.size(), 0);
    if (policy.mode == KeyframePolicy::Mode::Scored)
        for (std::size_t f = 0; f < seq.size(); ++f) {
            areas[f] = surface_area(seq.frames[f]);
            genus[f] = scoring_genus(seq.frames[f]);
        }
    return select_keyframes(areas, genus, policy);
}

GroupTrack track_group(const MeshSequence& seq, std::size_t keyframe, std::size_t first, std::size_t last,
                       const RegistrationParams& params) {
    if (first > last || last >= seq.size() || keyframe < first || keyframe > last)
        throw InvalidArgument("track_group: keyframe " + std::to_string(keyframe) + " outside range [" +
                              std::to_string(first) + ", " + std::to_string(last) + "]");
    GroupTrack g;
    g.keyframe = keyframe;
    g.first = first;
    g.last = last;
    g.frames.resize(last - first + 1);
    TrackedFrame& key = g.frames[keyframe - first];
    key.frame = key.keyframe = keyframe;
    key.mesh = seq.frames[keyframe];

    for (int dir : {1, -1}) {
        const TriMesh* previous = &key.mesh;
        int chain = 0;
        for (long long f = static_cast<long long>(keyframe) + dir;
             f >= static_cast<long long>(first) && f <= static_cast<long long>(last); f += dir) {
            RegistrationResult r = register_meshes(*previous, seq.frames[f], params);
            TrackedFrame& out = g.frames[f - first];
            out.frame = static_cast<std::size_t>(f);
            out.keyframe = keyframe;
            out.mesh = std::move(r.deformed_source);
            out.error = r.error;
            out.chain_length = ++chain;
            out.converged = r.converged;
            previous = &out.mesh;
        }
    }
    return g;
}

TrackedSequence track_sequence(const MeshSequence& seq, const std::vector<FrameGroup>& groups,
                               const RegistrationParams& params, int overlap) {
    if (overlap < 0) throw InvalidArgument("track_sequence: overlap must be >= 0");
    if (seq.size() == 0) throw InvalidArgument("track_sequence: empty sequence");
    validate_groups(groups, seq.size());

    std::vector<GroupTrack> tracks;
    for (const FrameGroup& g : groups) {
        const std::size_t first = g.first >= static_cast<std::size_t>(overlap) ? g.first - overlap : 0;
        const std::size_t last = std::min(seq.size() - 1, g.last + overlap);
        tracks.push_back(track_group(seq, g.keyframe, first, last, params));
    }

    TrackedSequence out;
    out.frames.resize(seq.size());
    std::vector<char> assigned(seq.size(), 0);
    for (std::size_t f = 0; f < seq.size(); ++f) {
        // Candidates come in group order, so keyframes are ascending.
        std::vector<const TrackedFrame*> cands;
        for (const GroupTrack& t : tracks)
            if (f >= t.first && f <= t.last) cands.push_back(&t.frames[f - t.first]);
        const TrackedFrame* best = cands.front();
        for (const TrackedFrame* c : cands)
            if (c->error < best->error) best = c;
        if (cands.size() > 1) {
            MergeDecision d;
            d.frame = f;
            d.chosen_keyframe = best->keyframe;
            d.chosen_error = best->error;
            for (const TrackedFrame* c : cands)
                if (c != best) d.rejected.emplace_back(c->keyframe, c->error);
            out.merges.push_back(d);
        }
        out.frames[f] = *best;
        assigned[f] = 1;
        if (!best->converged)
            out.warnings.push_back("frame " + std::to_string(f) + ": registration from keyframe " +
                                   std::to_string(best->keyframe) + " did not converge");
    }
    for (const FrameGroup& g : groups) {
        TrackedGroup tg;
        tg.keyframe = g.keyframe;
        for (std::size_t f = 0; f < seq.size(); ++f)
            if (out.frames[f].keyframe == g.keyframe) tg.members.push_back(f);
        out.groups.push_back(tg);
    }
    return out;
}

TrackedSequence track_sequence(const MeshSequence& seq, const KeyframePolicy& policy, const RegistrationParams& params,
                               int overlap) {
    return track_sequence(seq, select_keyframes(seq, policy), params, overlap);
}

std::vector<TriMesh> interpolate_meshes(const TriMesh& from, const TriMesh& to, int window) {
    if (window < 1) throw InvalidArgument("smooth_transition: window must be >= 1");
    if (from.vertices.size() != to.vertices.size())
        throw InvalidArgument("smooth_transition: meshes differ in vertex count");
    std::vector<TriMesh> out;
    for (int i = 0; i < window; ++i) {
        const double alpha = window == 1 ? 1.0 : static_cast<double>(i) / (window - 1);
        TriMesh m = from;
        for (std::size_t v = 0; v < m.vertices.size(); ++v)
            m.vertices[v] = (1.0 - alpha) * from.vertices[v] + alpha * to.vertices[v];
        out.push_back(std::move(m));
    }
    return out;
}

std::vector<TriMesh> smooth_transition(const TriMesh& a_end, const TriMesh& b_start, int window,
                                       const RegistrationParams& params) {
    if (window < 1) throw InvalidArgument("smooth_transition: window must be >= 1");
    const RegistrationResult r = register_meshes(a_end, b_start, params);
    return interpolate_meshes(a_end, r.deformed_source, window);
}

}  // namespace vva
