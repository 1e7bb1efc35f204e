#include "coassign/netsim.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <tuple>

#include <fmt/format.h>

namespace coassign {

namespace {

std::vector<double> flatten(const Eigen::MatrixXd& m)
{
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            out.push_back(m(i, j));
    return out;
}

Eigen::VectorXd payload_row(const std::vector<double>& flat, std::size_t row, Eigen::Index width)
{
    if ((row + 1) * static_cast<std::size_t>(width) > flat.size())
        throw NetsimError("message payload shorter than the sender's hosted rows");
    Eigen::VectorXd v(width);
    for (Eigen::Index j = 0; j < width; ++j)
        v(j) = flat[row * static_cast<std::size_t>(width) + static_cast<std::size_t>(j)];
    return v;
}

}  // namespace

Network::Network(const CommGraph& graph, const WeightMatrix& W, const AdmmConfig& config, const AdmmState* warm)
    : graph_(graph), rows_graph_(row_graph(graph, W.rows)), config_(config), n_(W.size()), row_labels_(W.rows)
{
    config_.validate();
    if (W.w.cols() != n_ || n_ == 0)
        throw AssignmentError("distributed ADMM needs a non-empty square weight matrix");
    step_ = resolve_gd_step(config_, rows_graph_);

    const bool use_warm = warm && warm->alpha.rows() == n_ && warm->alpha.cols() == n_ && warm->z.rows() == n_
        && warm->u.rows() == n_;
    const AdmmState init = use_warm ? *warm : AdmmState::uniform(n_);

    nodes_.resize(graph.size());
    for (AgentIndex a = 0; a < graph.size(); ++a) {
        AgentNode& node = nodes_[a];
        node.id = a;
        node.neighbors = graph.neighbors(a);
        for (Eigen::Index r = 0; r < n_; ++r)
            if (row_labels_[static_cast<std::size_t>(r)].host == a)
                node.rows.push_back(r);
        const auto k = static_cast<Eigen::Index>(node.rows.size());
        node.w.resize(k, n_);
        node.alpha.resize(k, n_);
        node.z.resize(k, n_);
        node.u.resize(k, n_);
        for (Eigen::Index q = 0; q < k; ++q) {
            const Eigen::Index r = node.rows[static_cast<std::size_t>(q)];
            node.w.row(q) = W.w.row(r);
            node.alpha.row(q) = init.alpha.row(r);
            node.z.row(q) = init.z.row(r);
            node.u.row(q) = init.u.row(r);
        }
    }
    s_.resize(nodes_.size());
}

void Network::node_alpha_u(AgentNode& node)
{
    for (Eigen::Index q = 0; q < node.alpha.rows(); ++q)
        node.alpha.row(q) = alpha_update_local(node.w.row(q).transpose(), node.z.row(q).transpose(),
                                               node.u.row(q).transpose(), config_.rho)
                                .transpose();
    s_[node.id] = node.alpha + node.u;
}

void Network::node_z(AgentNode& node, const std::vector<const RoundMessage*>& inbox)
{
    const Eigen::MatrixXd z_old = node.z;
    const Eigen::MatrixXd& s_own = s_[node.id];
    std::vector<Eigen::VectorXd> nz, ns;
    for (std::size_t q = 0; q < node.rows.size(); ++q) {
        const Eigen::Index r = node.rows[q];
        nz.clear();
        ns.clear();
        for (AgentIndex j : rows_graph_.neighbors(static_cast<AgentIndex>(r))) {
            const AgentIndex host = row_labels_[j].host;
            if (host == node.id) {
                const auto local = static_cast<Eigen::Index>(
                    std::find(node.rows.begin(), node.rows.end(), static_cast<Eigen::Index>(j)) - node.rows.begin());
                nz.emplace_back(z_old.row(local).transpose());
                ns.emplace_back(s_own.row(local).transpose());
                continue;
            }
            const RoundMessage* msg = nullptr;
            for (const RoundMessage* m : inbox)
                if (m->sender == host)
                    msg = m;
            if (!msg)
                throw NetsimError(fmt::format("agent {} has no message from agent {} in exchange {}", node.id, host,
                                              exchange_));
            const auto& sender_rows = nodes_[host].rows;  // static roster, known to every agent
            const auto pos = static_cast<std::size_t>(
                std::find(sender_rows.begin(), sender_rows.end(), static_cast<Eigen::Index>(j)) - sender_rows.begin());
            nz.push_back(payload_row(msg->z, pos, n_));
            ns.push_back(payload_row(msg->alpha_u, pos, n_));
        }
        node.z.row(static_cast<Eigen::Index>(q)) =
            z_update_row(z_old.row(static_cast<Eigen::Index>(q)).transpose(),
                         s_own.row(static_cast<Eigen::Index>(q)).transpose(), nz, ns, step_)
                .transpose();
    }
}

void Network::run_round(Exec exec, MessageLog* record, const MessageLog* replay)
{
    ++round_;
    const auto count = static_cast<std::ptrdiff_t>(nodes_.size());

    if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t a = 0; a < count; ++a)
            node_alpha_u(nodes_[static_cast<std::size_t>(a)]);
    } else {
        for (std::ptrdiff_t a = 0; a < count; ++a)
            node_alpha_u(nodes_[static_cast<std::size_t>(a)]);
    }

    if (replay && replay != indexed_log_) {
        replay_index_.clear();
        for (const auto& rec : *replay)
            replay_index_[{rec.round, rec.sender, rec.receiver, rec.kind}] = &rec;
        indexed_log_ = replay;
    }
    const auto& replay_index = replay_index_;

    for (int inner = 0; inner < config_.inner_iterations; ++inner) {
        ++exchange_;
        // Send phase: one message per directed edge.
        std::vector<RoundMessage> outbox;
        for (const auto& node : nodes_) {
            const std::vector<double> z = flatten(node.z);
            const std::vector<double> s = flatten(s_[node.id]);
            for (AgentIndex nb : node.neighbors)
                outbox.push_back({exchange_, node.id, nb, z, s});
        }
        messages_ += outbox.size();

        std::vector<RoundMessage> delivered;
        if (replay) {
            for (const auto& m : outbox) {
                auto iz = replay_index.find({m.round, m.sender, m.receiver, PayloadKind::Z});
                auto is = replay_index.find({m.round, m.sender, m.receiver, PayloadKind::AlphaU});
                if (iz == replay_index.end() || is == replay_index.end()) {
                    ++replay_mismatches_;
                    delivered.push_back(m);
                    continue;
                }
                RoundMessage logged{m.round, m.sender, m.receiver, iz->second->payload, is->second->payload};
                if (logged.z != m.z || logged.alpha_u != m.alpha_u)
                    ++replay_mismatches_;
                delivered.push_back(std::move(logged));
            }
        } else {
            delivered = std::move(outbox);
        }
        if (record)
            for (const auto& m : delivered) {
                record->push_back({m.round, m.sender, m.receiver, PayloadKind::Z, m.z});
                record->push_back({m.round, m.sender, m.receiver, PayloadKind::AlphaU, m.alpha_u});
            }

        // Delivery: a link exists only along graph edges.
        std::vector<std::vector<const RoundMessage*>> inbox(nodes_.size());
        for (const auto& m : delivered) {
            if (!graph_.adjacent(m.sender, m.receiver)) {
                ++violations_;
                continue;
            }
            inbox[m.receiver].push_back(&m);
        }

        if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
            for (std::ptrdiff_t a = 0; a < count; ++a)
                node_z(nodes_[static_cast<std::size_t>(a)], inbox[static_cast<std::size_t>(a)]);
        } else {
            for (std::ptrdiff_t a = 0; a < count; ++a)
                node_z(nodes_[static_cast<std::size_t>(a)], inbox[static_cast<std::size_t>(a)]);
        }
    }

    for (auto& node : nodes_) {
        node.u = node.u + node.alpha - node.z;
        node.round = round_;
    }
}

AdmmState Network::assemble() const
{
    AdmmState st;
    st.alpha.resize(n_, n_);
    st.z.resize(n_, n_);
    st.u.resize(n_, n_);
    for (const auto& node : nodes_)
        for (std::size_t q = 0; q < node.rows.size(); ++q) {
            const Eigen::Index r = node.rows[q];
            st.alpha.row(r) = node.alpha.row(static_cast<Eigen::Index>(q));
            st.z.row(r) = node.z.row(static_cast<Eigen::Index>(q));
            st.u.row(r) = node.u.row(static_cast<Eigen::Index>(q));
        }
    st.iteration = round_;
    return st;
}

namespace {

DistributedResult drive(Network& net, const WeightMatrix& W, const AdmmConfig& config, Exec exec,
                        MessageLog* record, const MessageLog* replay)
{
    DistributedResult res;
    AdmmState prev = net.assemble();
    for (int k = 1; k <= config.max_outer; ++k) {
        net.run_round(exec, record, replay);
        AdmmState st = net.assemble();
        st.primal_residual = (st.alpha - st.z).norm();
        st.dual_residual = config.rho * (st.z - prev.z).norm();
        res.history.push_back({k, st.primal_residual, st.dual_residual, assignment_objective(W, st.alpha)});
        prev = st;
        if (st.primal_residual < config.residual_tol && st.dual_residual < config.residual_tol) {
            res.converged = true;
            break;
        }
    }
    res.state = prev;
    res.message_count = net.messages_sent();
    res.audit_violations = net.audit_violations();
    res.replay_mismatches = net.replay_mismatches();
    return res;
}

}  // namespace

DistributedResult run_distributed_admm(const CommGraph& graph, const WeightMatrix& W, const AdmmConfig& config,
                                       const AdmmState* warm, Exec exec, MessageLog* record)
{
    Network net(graph, W, config, warm);
    return drive(net, W, config, exec, record, nullptr);
}

DistributedResult replay_distributed_admm(const CommGraph& graph, const WeightMatrix& W, const AdmmConfig& config,
                                          const MessageLog& log, const AdmmState* warm)
{
    Network net(graph, W, config, warm);
    return drive(net, W, config, Exec::Serial, nullptr, &log);
}

void write_message_log_csv(std::ostream& os, const MessageLog& log)
{
    os << "round,sender,receiver,kind,payload\n";
    for (const auto& r : log) {
        os << r.round << ',' << r.sender << ',' << r.receiver << ',' << (r.kind == PayloadKind::Z ? "z" : "alpha_u");
        for (double v : r.payload)
            os << ',' << fmt::format("{:.17g}", v);
        os << '\n';
    }
}

MessageLog read_message_log_csv(std::istream& is)
{
    MessageLog log;
    std::string line;
    std::getline(is, line);
    if (line.rfind("round,sender,receiver,kind", 0) != 0)
        throw NetsimError("message log CSV header missing");
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty())
            continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ','))
            cells.push_back(cell);
        if (cells.size() < 4)
            throw NetsimError(fmt::format("message log line {}: expected at least 4 fields", lineno));
        MessageRecord r;
        try {
            r.round = std::stoi(cells[0]);
            r.sender = std::stoul(cells[1]);
            r.receiver = std::stoul(cells[2]);
            if (cells[3] == "z")
                r.kind = PayloadKind::Z;
            else if (cells[3] == "alpha_u")
                r.kind = PayloadKind::AlphaU;
            else
                throw NetsimError(fmt::format("message log line {}: unknown kind '{}'", lineno, cells[3]));
            for (std::size_t k = 4; k < cells.size(); ++k)
                r.payload.push_back(std::stod(cells[k]));
        } catch (const std::logic_error&) {
            throw NetsimError(fmt::format("message log line {}: malformed number", lineno));
        }
        log.push_back(std::move(r));
    }
    return log;
}

namespace {

template <typename T>
void put_le(std::ostream& os, T v)
{
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                 std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>>;
    const U bits = std::bit_cast<U>(v);
    std::array<char, sizeof(T)> buf{};
    for (std::size_t b = 0; b < sizeof(T); ++b)
        buf[b] = static_cast<char>((bits >> (8 * b)) & 0xFF);
    os.write(buf.data(), sizeof(T));
}

template <typename T>
bool get_le(std::istream& is, T& v)
{
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                 std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>>;
    std::array<unsigned char, sizeof(T)> buf{};
    if (!is.read(reinterpret_cast<char*>(buf.data()), sizeof(T)))
        return false;
    U bits = 0;
    for (std::size_t b = 0; b < sizeof(T); ++b)
        bits |= static_cast<U>(buf[b]) << (8 * b);
    v = std::bit_cast<T>(bits);
    return true;
}

}  // namespace

void write_message_log_binary(std::ostream& os, const MessageLog& log)
{
    for (const auto& r : log) {
        put_le<std::int64_t>(os, r.round);
        put_le<std::int64_t>(os, static_cast<std::int64_t>(r.sender));
        put_le<std::int64_t>(os, static_cast<std::int64_t>(r.receiver));
        put_le<std::uint8_t>(os, static_cast<std::uint8_t>(r.kind));
        put_le<std::uint32_t>(os, static_cast<std::uint32_t>(r.payload.size()));
        for (double v : r.payload)
            put_le<double>(os, v);
    }
}

MessageLog read_message_log_binary(std::istream& is)
{
    MessageLog log;
    while (true) {
        std::int64_t round = 0, sender = 0, receiver = 0;
        if (!get_le(is, round))
            break;
        std::uint8_t kind = 0;
        std::uint32_t len = 0;
        if (!get_le(is, sender) || !get_le(is, receiver) || !get_le(is, kind) || !get_le(is, len))
            throw NetsimError("truncated binary message record header");
        if (kind > 1)
            throw NetsimError("binary message record has unknown kind");
        MessageRecord r{static_cast<int>(round), static_cast<AgentIndex>(sender), static_cast<AgentIndex>(receiver),
                        static_cast<PayloadKind>(kind), {}};
        r.payload.resize(len);
        for (auto& v : r.payload)
            if (!get_le(is, v))
                throw NetsimError("truncated binary message payload");
        log.push_back(std::move(r));
    }
    return log;
}

}  // namespace coassign
