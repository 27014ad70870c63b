#include "sa/server.hpp"

#include <atomic>
#include <deque>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <thread>
#include <vector>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

namespace sa {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;
using ojson = nlohmann::ordered_json;

namespace {

std::string url_decode(std::string_view s) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '+') {
            out += ' ';
        } else if (s[i] == '%' && i + 2 < s.size()) {
            const auto hex = std::string(s.substr(i + 1, 2));
            char* end = nullptr;
            const long v = std::strtol(hex.c_str(), &end, 16);
            if (hex.size() == 2 && end == hex.c_str() + 2) {
                out += static_cast<char>(v);
                i += 2;
            } else {
                out += s[i];
            }
        } else {
            out += s[i];
        }
    }
    return out;
}

struct Target {
    std::string path;
    std::map<std::string, std::string> query;
};

std::string_view as_view(beast::string_view s) { return {s.data(), s.size()}; }

Target split_target(std::string_view t) {
    Target out;
    const auto q = t.find('?');
    out.path = url_decode(t.substr(0, q));
    if (q == std::string_view::npos) return out;
    std::string_view rest = t.substr(q + 1);
    while (!rest.empty()) {
        const auto amp = rest.find('&');
        const std::string_view pair = rest.substr(0, amp);
        const auto eq = pair.find('=');
        if (eq == std::string_view::npos) {
            out.query[url_decode(pair)] = "";
        } else {
            out.query[url_decode(pair.substr(0, eq))] = url_decode(pair.substr(eq + 1));
        }
        if (amp == std::string_view::npos) break;
        rest = rest.substr(amp + 1);
    }
    return out;
}

std::string mime_type(const std::filesystem::path& p) {
    const std::string ext = p.extension().string();
    if (ext == ".html" || ext == ".htm") return "text/html; charset=utf-8";
    if (ext == ".js" || ext == ".mjs") return "application/javascript";
    if (ext == ".css") return "text/css";
    if (ext == ".json" || ext == ".map") return "application/json";
    if (ext == ".svg") return "image/svg+xml";
    if (ext == ".png") return "image/png";
    if (ext == ".ico") return "image/x-icon";
    if (ext == ".wasm") return "application/wasm";
    return "application/octet-stream";
}

const char* placeholder_page = R"(<!doctype html>
<html><head><meta charset="utf-8"><title>assistctl</title></head>
<body>
<h1>assistctl session server</h1>
<p>No UI assets were configured. Start the server with <code>--ui-dir</code> pointing at a built client,
or connect a WebSocket client to <code>/ws</code>.</p>
<p>Scene: <a href="/api/scene">/api/scene</a></p>
</body></html>
)";

std::optional<int> int_param(const std::map<std::string, std::string>& q, const std::string& key) {
    auto it = q.find(key);
    if (it == q.end()) return std::nullopt;
    try {
        std::size_t used = 0;
        const int v = std::stoi(it->second, &used);
        if (used != it->second.size()) throw std::invalid_argument(key);
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("query parameter '" + key + "' must be an integer");
    }
}

std::optional<double> double_param(const std::map<std::string, std::string>& q, const std::string& key) {
    auto it = q.find(key);
    if (it == q.end()) return std::nullopt;
    try {
        std::size_t used = 0;
        const double v = std::stod(it->second, &used);
        if (used != it->second.size() || !std::isfinite(v)) throw std::invalid_argument(key);
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("query parameter '" + key + "' must be a number");
    }
}

} // namespace

struct Server::Impl {
    // Closers for live sockets, run once the io threads have stopped. Must outlive ioc.
    std::mutex sockets_mu;
    std::uint64_t next_socket = 1;
    std::map<std::uint64_t, std::function<void()>> sockets;

    std::shared_ptr<const Engine> engine;
    ServerOptions opts;
    net::io_context ioc;
    tcp::acceptor acceptor{ioc};
    SessionManager sessions;
    std::vector<std::thread> threads;
    std::atomic<bool> stopped{false};

    // Latest connection attached to each session; older ones stop ticking.
    std::mutex owners_mu;
    std::map<std::string, std::uint64_t> owners;
    std::atomic<std::uint64_t> next_owner{1};

    std::uint64_t claim(const std::string& session) {
        const std::uint64_t token = next_owner++;
        std::lock_guard lock(owners_mu);
        owners[session] = token;
        return token;
    }
    bool owns(const std::string& session, std::uint64_t token) {
        std::lock_guard lock(owners_mu);
        auto it = owners.find(session);
        return it != owners.end() && it->second == token;
    }

    std::uint64_t track(std::function<void()> closer) {
        std::lock_guard lock(sockets_mu);
        sockets.emplace(next_socket, std::move(closer));
        return next_socket++;
    }
    void untrack(std::uint64_t id) {
        std::lock_guard lock(sockets_mu);
        sockets.erase(id);
    }

    std::chrono::milliseconds tick_interval() const {
        if (opts.tick_interval) return *opts.tick_interval;
        return std::chrono::milliseconds(std::max<long>(1, std::lround(engine->workspace().dt * 1000.0)));
    }

    void accept();
};

namespace {

class WsConnection : public std::enable_shared_from_this<WsConnection> {
public:
    WsConnection(tcp::socket&& socket, Server::Impl& server)
        : ws_(std::move(socket)), timer_(ws_.get_executor()), server_(server) {}
    ~WsConnection() { server_.untrack(tracked_); }

    void run(http::request<http::string_body> req) {
        tracked_ = server_.track([weak = weak_from_this()] {
            if (auto self = weak.lock()) {
                beast::error_code ec;
                beast::get_lowest_layer(self->ws_).socket().close(ec);
            }
        });
        const Target t = split_target(as_view(req.target()));
        if (auto it = t.query.find("session"); it != t.query.end()) session_ = server_.sessions.find(it->second);
        if (!session_) session_ = server_.sessions.find(server_.sessions.create_session(server_.engine));
        token_ = server_.claim(session_->id());

        ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
        ws_.async_accept(req, beast::bind_front_handler(&WsConnection::on_accept, shared_from_this()));
    }

private:
    void on_accept(beast::error_code ec) {
        if (ec) return;
        const Engine& e = session_->engine();
        ojson goals = ojson::array();
        for (const auto& g : e.scene().goals) goals.push_back(g.name);
        const auto st = session_->state();
        ojson hello{{"type", "hello"},        {"session", session_->id()}, {"method", to_string(st.method)},
                    {"scene_hash", e.scene_hash()}, {"goals", goals},     {"tick", st.tick},
                    {"scene", ojson::parse(to_json(e.config()).dump())}};
        send(hello.dump());
        do_read();
        next_tick_ = std::chrono::steady_clock::now() + server_.tick_interval();
        schedule_tick();
    }

    void schedule_tick() {
        timer_.expires_at(next_tick_);
        timer_.async_wait(beast::bind_front_handler(&WsConnection::on_tick, shared_from_this()));
    }

    void on_tick(beast::error_code ec) {
        if (ec || closed_) return;
        if (!server_.owns(session_->id(), token_)) {
            close();
            return;
        }
        send(to_json(session_->tick()).dump());
        next_tick_ += server_.tick_interval();
        schedule_tick();
    }

    void do_read() {
        ws_.async_read(buffer_, beast::bind_front_handler(&WsConnection::on_read, shared_from_this()));
    }

    void on_read(beast::error_code ec, std::size_t) {
        if (ec) {
            closed_ = true;
            timer_.cancel();
            return;
        }
        const std::string text = beast::buffers_to_string(buffer_.data());
        buffer_.consume(buffer_.size());
        handle(text);
        do_read();
    }

    void handle(const std::string& text) {
        try {
            const ClientMessage msg = parse_client_message(text);
            if (const auto* in = std::get_if<InputMessage>(&msg)) {
                session_->on_input(in->vec, in->capture);
            } else if (const auto* sm = std::get_if<SetMethodMessage>(&msg)) {
                session_->set_method(sm->method);
                send(ojson{{"type", "ack"}, {"request", "set_method"}, {"method", to_string(sm->method)}}.dump());
            } else if (std::holds_alternative<ResetMessage>(msg)) {
                session_->reset();
                send(ojson{{"type", "ack"}, {"request", "reset"}}.dump());
            } else if (const auto* hr = std::get_if<HeatmapRequest>(&msg)) {
                send(to_json(session_->heatmap(hr->goal, hr->rows, hr->cols, hr->z)).dump());
            }
        } catch (const std::exception& e) {
            send(ojson{{"type", "error"}, {"message", e.what()}}.dump());
        }
    }

    void send(std::string text) {
        outbox_.push_back(std::move(text));
        if (outbox_.size() == 1) write_next();
    }

    void write_next() {
        ws_.text(true);
        ws_.async_write(net::buffer(outbox_.front()),
                        beast::bind_front_handler(&WsConnection::on_write, shared_from_this()));
    }

    void on_write(beast::error_code ec, std::size_t) {
        if (ec) {
            closed_ = true;
            timer_.cancel();
            return;
        }
        outbox_.pop_front();
        if (!outbox_.empty()) write_next();
    }

    void close() {
        closed_ = true;
        timer_.cancel();
        ws_.async_close(websocket::close_code::going_away, [self = shared_from_this()](beast::error_code) {});
    }

    websocket::stream<beast::tcp_stream> ws_;
    net::steady_timer timer_;
    Server::Impl& server_;
    beast::flat_buffer buffer_;
    std::deque<std::string> outbox_;
    std::shared_ptr<Session> session_;
    std::uint64_t token_ = 0;
    std::uint64_t tracked_ = 0;
    std::chrono::steady_clock::time_point next_tick_;
    bool closed_ = false;
};

class HttpConnection : public std::enable_shared_from_this<HttpConnection> {
public:
    HttpConnection(tcp::socket&& socket, Server::Impl& server) : stream_(std::move(socket)), server_(server) {}

    void run() {
        net::dispatch(stream_.get_executor(), beast::bind_front_handler(&HttpConnection::do_read, shared_from_this()));
    }

private:
    void do_read() {
        req_ = {};
        stream_.expires_after(std::chrono::seconds(30));
        http::async_read(stream_, buffer_, req_, beast::bind_front_handler(&HttpConnection::on_read, shared_from_this()));
    }

    void on_read(beast::error_code ec, std::size_t) {
        if (ec) {
            stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
            return;
        }
        if (websocket::is_upgrade(req_)) {
            if (split_target(as_view(req_.target())).path == "/ws") {
                stream_.expires_never();
                std::make_shared<WsConnection>(stream_.release_socket(), server_)->run(std::move(req_));
                return;
            }
        }
        respond(route());
    }

    http::response<http::string_body> reply(http::status status, std::string body, const std::string& type) {
        http::response<http::string_body> res{status, req_.version()};
        res.set(http::field::server, "assistctl");
        res.set(http::field::content_type, type);
        res.keep_alive(req_.keep_alive());
        res.body() = std::move(body);
        res.prepare_payload();
        return res;
    }

    http::response<http::string_body> json_reply(http::status status, const ojson& j) {
        return reply(status, j.dump(), "application/json");
    }

    http::response<http::string_body> error_reply(http::status status, const std::string& message) {
        return json_reply(status, ojson{{"type", "error"}, {"message", message}});
    }

    http::response<http::string_body> route() {
        if (req_.method() != http::verb::get) return error_reply(http::status::method_not_allowed, "only GET is supported");
        const Target t = split_target(as_view(req_.target()));
        try {
            if (t.path == "/api/scene") return json_reply(http::status::ok, scene_doc());
            if (t.path == "/api/heatmap") return heatmap(t);
            return static_file(t.path);
        } catch (const NotFound& e) {
            return error_reply(http::status::not_found, e.what());
        } catch (const std::invalid_argument& e) {
            return error_reply(http::status::bad_request, e.what());
        } catch (const std::exception& e) {
            return error_reply(http::status::internal_server_error, e.what());
        }
    }

    ojson scene_doc() const {
        const Engine& e = *server_.engine;
        ojson goals = ojson::array();
        for (const auto& g : e.scene().goals) goals.push_back(g.name);
        return {{"scene_hash", e.scene_hash()},
                {"goals", goals},
                {"methods", ojson::array({"policy", "blend", "direct"})},
                {"scene", ojson::parse(to_json(e.config()).dump())}};
    }

    http::response<http::string_body> heatmap(const Target& t) {
        auto goal = t.query.find("goal");
        if (goal == t.query.end()) throw std::invalid_argument("query parameter 'goal' is required");
        const int rows = int_param(t.query, "rows").value_or(48);
        const int cols = int_param(t.query, "cols").value_or(48);
        const auto z = double_param(t.query, "z");
        if (auto sid = t.query.find("session"); sid != t.query.end()) {
            auto session = server_.sessions.find(sid->second);
            if (!session) throw NotFound("unknown session '" + sid->second + "'");
            return json_reply(http::status::ok, to_json(session->heatmap(goal->second, rows, cols, z)));
        }
        const Engine& e = *server_.engine;
        return json_reply(http::status::ok, to_json(compute_heatmap(e, e.predictor().prior(), goal->second, rows, cols, z)));
    }

    http::response<http::string_body> static_file(const std::string& path) {
        if (!server_.opts.ui_dir) {
            if (path == "/" || path == "/index.html") return reply(http::status::ok, placeholder_page, "text/html; charset=utf-8");
            throw NotFound("no such resource: " + path);
        }
        if (path.empty() || path[0] != '/' || path.find("..") != std::string::npos) {
            throw std::invalid_argument("bad path");
        }
        std::filesystem::path file = *server_.opts.ui_dir / path.substr(1);
        if (path.back() == '/') file /= "index.html";
        std::ifstream in(file, std::ios::binary);
        if (!in) {
            if (path == "/") return reply(http::status::ok, placeholder_page, "text/html; charset=utf-8");
            throw NotFound("no such resource: " + path);
        }
        std::ostringstream body;
        body << in.rdbuf();
        return reply(http::status::ok, body.str(), mime_type(file));
    }

    void respond(http::response<http::string_body> res) {
        auto sp = std::make_shared<http::response<http::string_body>>(std::move(res));
        http::async_write(stream_, *sp, [self = shared_from_this(), sp](beast::error_code ec, std::size_t) {
            if (ec) return;
            if (!sp->keep_alive()) {
                self->stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
                return;
            }
            self->do_read();
        });
    }

    beast::tcp_stream stream_;
    Server::Impl& server_;
    beast::flat_buffer buffer_;
    http::request<http::string_body> req_;
};

} // namespace

void Server::Impl::accept() {
    acceptor.async_accept(net::make_strand(ioc), [this](beast::error_code ec, tcp::socket socket) {
        if (ec) {
            if (!stopped) accept();
            return;
        }
        std::make_shared<HttpConnection>(std::move(socket), *this)->run();
        accept();
    });
}

Server::Server(std::shared_ptr<const Engine> engine, ServerOptions opts) : impl_(std::make_unique<Impl>()) {
    impl_->engine = std::move(engine);
    impl_->opts = std::move(opts);
    const std::string where = impl_->opts.address + ":" + std::to_string(impl_->opts.port);
    try {
        const tcp::endpoint ep{net::ip::make_address(impl_->opts.address), impl_->opts.port};
        impl_->acceptor.open(ep.protocol());
        impl_->acceptor.bind(ep);
        impl_->acceptor.listen(net::socket_base::max_listen_connections);
    } catch (const boost::system::system_error& e) {
        throw std::runtime_error("cannot listen on " + where + ": " + e.code().message());
    }
    impl_->accept();
}

Server::~Server() { stop(); }

unsigned short Server::port() const { return impl_->acceptor.local_endpoint().port(); }

SessionManager& Server::sessions() { return impl_->sessions; }

void Server::run() {
    net::signal_set signals(impl_->ioc, SIGINT, SIGTERM);
    signals.async_wait([this](beast::error_code ec, int) {
        if (!ec) impl_->ioc.stop();
    });
    const unsigned n = std::max(1u, impl_->opts.threads);
    for (unsigned i = 1; i < n; ++i) impl_->threads.emplace_back([this] { impl_->ioc.run(); });
    impl_->ioc.run();
}

void Server::start() {
    const unsigned n = std::max(1u, impl_->opts.threads);
    for (unsigned i = 0; i < n; ++i) impl_->threads.emplace_back([this] { impl_->ioc.run(); });
}

void Server::stop() {
    if (impl_->stopped.exchange(true)) return;
    net::post(impl_->ioc, [this] {
        beast::error_code ec;
        impl_->acceptor.close(ec);
    });
    impl_->ioc.stop();
    for (auto& t : impl_->threads) {
        if (t.joinable() && t.get_id() != std::this_thread::get_id()) t.join();
    }
    impl_->threads.clear();
    std::map<std::uint64_t, std::function<void()>> open;
    {
        std::lock_guard lock(impl_->sockets_mu);
        open = impl_->sockets;
    }
    for (auto& [id, close] : open) close();
}

} // namespace sa
