#pragma once

#include "mosaic/error.hpp"

#include <chrono>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace mosaic {

struct GraphRun {
    std::vector<std::string> trace;  // nodes entered, ending with End
    std::vector<std::pair<std::string, double>> timings_ms;
    int retries = 0;
};

// A small state-machine engine: named nodes mutate a shared state, edges
// are fixed or chosen by a router, and any node failure diverts to the error
// node, whose own edges lead on to End.
template <class State>
class StateGraph {
public:
    using NodeFn = std::function<void(State&)>;
    using RouterFn = std::function<std::string(const State&)>;
    using ErrorFn = std::function<void(State&, const std::string& node, const std::string& message)>;
    using HasErrorFn = std::function<bool(const State&)>;
    using HookFn = std::function<void(const std::string& node, State&)>;

    static inline const std::string kEnd = "End";

    void add_node(const std::string& name, NodeFn fn) { nodes_[name] = std::move(fn); }
    void add_edge(const std::string& from, const std::string& to) {
        routers_[from] = [to](const State&) { return to; };
    }
    void add_conditional_edge(const std::string& from, RouterFn router) { routers_[from] = std::move(router); }
    void set_entry(const std::string& name) { entry_ = name; }
    void set_error_node(const std::string& name) { error_node_ = name; }
    void on_error(ErrorFn fn) { record_error_ = std::move(fn); }
    // A node may also fail by leaving an error in the state.
    void has_error(HasErrorFn fn) { has_error_ = std::move(fn); }
    // Attempts per node on transport errors beyond the first.
    void set_retries(int n) { retries_ = n; }
    // Runs before each node body, inside its error handling.
    void before_node(HookFn fn) { before_ = std::move(fn); }

    GraphRun run(State& state, int max_steps = 64) const {
        GraphRun run;
        std::string current = entry_;
        bool in_error_path = false;
        for (int step = 0; step < max_steps; ++step) {
            run.trace.push_back(current);
            if (current == kEnd) return run;
            auto node = nodes_.find(current);
            bool failed = false;
            const auto t0 = std::chrono::steady_clock::now();
            if (node == nodes_.end()) {
                fail(state, current, "no node named " + current);
                failed = true;
            } else {
                for (int attempt = 0;; ++attempt) {
                    try {
                        if (before_) before_(current, state);
                        node->second(state);
                        break;
                    } catch (const Error& e) {
                        if (is_transport_error(e) && attempt < retries_) {
                            ++run.retries;
                            continue;
                        }
                        fail(state, current, e.what());
                        failed = true;
                        break;
                    } catch (const std::exception& e) {
                        fail(state, current, e.what());
                        failed = true;
                        break;
                    }
                }
            }
            const auto t1 = std::chrono::steady_clock::now();
            run.timings_ms.emplace_back(current, std::chrono::duration<double, std::milli>(t1 - t0).count());
            if (!failed && !in_error_path && has_error_ && has_error_(state)) failed = true;

            if (failed && !in_error_path && !error_node_.empty() && current != error_node_) {
                in_error_path = true;
                current = error_node_;
                continue;
            }
            if (failed && in_error_path) {
                current = kEnd;  // the error node itself failed
                continue;
            }
            auto r = routers_.find(current);
            current = r == routers_.end() ? kEnd : r->second(state);
        }
        fail(state, current, "step limit reached");
        run.trace.push_back(kEnd);
        return run;
    }

private:
    void fail(State& state, const std::string& node, const std::string& message) const {
        if (record_error_) record_error_(state, node, message);
    }

    std::map<std::string, NodeFn> nodes_;
    std::map<std::string, RouterFn> routers_;
    std::string entry_;
    std::string error_node_;
    ErrorFn record_error_;
    HasErrorFn has_error_;
    HookFn before_;
    int retries_ = 1;
};

} // namespace mosaic
