#include "lootcrawl/play/server.hpp"

#include <deque>
#include <regex>

#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

namespace lootcrawl::play {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

struct Server::Impl {
  asio::io_context ioc;
  tcp::acceptor acceptor{ioc};
};

struct Server::Connection {
  explicit Connection(tcp::socket s) : socket(std::move(s)) {}
  tcp::socket socket;
  std::thread thread;
  std::atomic<bool> done{false};
};

namespace {

using Request = http::request<http::string_body>;
using Reply = http::response<http::string_body>;

Reply make_reply(const Request& req, int status, const json& body) {
  Reply res{static_cast<http::status>(status), req.version()};
  res.set(http::field::server, "lootcrawl-playserve");
  res.set(http::field::access_control_allow_origin, "*");
  res.keep_alive(req.keep_alive());
  if (!body.is_null()) {
    res.set(http::field::content_type, "application/json");
    res.body() = body.dump();
  }
  res.prepare_payload();
  return res;
}

json error_body(const std::string& code, const std::string& message) { return {{"error", code}, {"message", message}}; }

struct Route {
  enum Kind { Collection, Item, Actions, Events, Health, None } kind = None;
  std::string id;
};

Route route_of(std::string_view target) {
  const std::string path(target.substr(0, target.find('?')));
  static const std::regex item(R"(^/v1/sessions/([A-Za-z0-9_-]+)(/actions|/events)?/?$)");
  if (path == "/v1/sessions" || path == "/v1/sessions/") return {Route::Collection, ""};
  if (path == "/v1/health") return {Route::Health, ""};
  std::smatch m;
  if (std::regex_match(path, m, item)) {
    if (m[2] == "/actions") return {Route::Actions, m[1]};
    if (m[2] == "/events") return {Route::Events, m[1]};
    return {Route::Item, m[1]};
  }
  return {};
}

std::optional<json> parse_body(const Request& req) {
  if (req.body().empty()) return json::object();
  try {
    return json::parse(req.body());
  } catch (const json::parse_error&) {
    return std::nullopt;
  }
}

}  // namespace

Server::Server(ServerOptions options) : options_(std::move(options)), store_(options_.ttl), impl_(std::make_unique<Impl>()) {
  const tcp::endpoint ep{asio::ip::make_address(options_.address), options_.port};
  impl_->acceptor.open(ep.protocol());
  impl_->acceptor.set_option(asio::socket_base::reuse_address(true));
  impl_->acceptor.bind(ep);
  impl_->acceptor.listen();
  port_ = impl_->acceptor.local_endpoint().port();
}

Server::~Server() { stop(); }

void Server::start() { acceptor_thread_ = std::thread([this] { accept_loop(); }); }

void Server::accept_loop() {
  while (!stopping_) {
    beast::error_code ec;
    tcp::socket socket(impl_->ioc);
    impl_->acceptor.accept(socket, ec);
    if (ec) {
      if (stopping_) return;
      continue;
    }
    auto conn = std::make_shared<Connection>(std::move(socket));
    std::lock_guard lock(conns_mu_);
    if (stopping_) return;
    reap();
    conns_.push_back(conn);
    conn->thread = std::thread([this, conn] {
      serve(conn);
      conn->done = true;
    });
  }
}

void Server::reap() {
  for (auto it = conns_.begin(); it != conns_.end();) {
    if ((*it)->done) {
      (*it)->thread.join();
      it = conns_.erase(it);
    } else {
      ++it;
    }
  }
}

void Server::stop() {
  if (stopping_.exchange(true)) return;
  beast::error_code ec;
  impl_->acceptor.cancel(ec);
  impl_->acceptor.close(ec);
  // unblock a pending accept() on platforms where close() alone does not
  {
    tcp::socket poke(impl_->ioc);
    poke.connect({asio::ip::make_address(options_.address == "0.0.0.0" ? "127.0.0.1" : options_.address), port_}, ec);
  }
  if (acceptor_thread_.joinable()) acceptor_thread_.join();
  std::list<std::shared_ptr<Connection>> conns;
  {
    std::lock_guard lock(conns_mu_);
    conns.swap(conns_);
  }
  for (auto& c : conns) c->socket.shutdown(tcp::socket::shutdown_both, ec);
  for (auto& c : conns) {
    if (c->thread.joinable()) c->thread.join();
  }
  std::lock_guard lock(wait_mu_);
  wait_cv_.notify_all();
}

void Server::wait() {
  std::unique_lock lock(wait_mu_);
  wait_cv_.wait(lock, [this] { return stopping_.load(); });
}

void Server::serve(std::shared_ptr<Connection> conn) {
  beast::flat_buffer buffer;
  beast::error_code ec;
  for (;;) {
    Request req;
    http::read(conn->socket, buffer, req, ec);
    if (ec) return;

    const Route r = route_of(std::string_view(req.target().data(), req.target().size()));
    if (r.kind == Route::Events && websocket::is_upgrade(req)) {
      struct Mailbox {
        std::mutex mu;
        std::condition_variable cv;
        std::deque<std::string> queue;
      };
      auto box = std::make_shared<Mailbox>();
      const long long token = store_.subscribe(r.id, [box](const std::string& msg) {
        std::lock_guard lock(box->mu);
        box->queue.push_back(msg);
        box->cv.notify_one();
      });
      if (token < 0) {
        http::write(conn->socket, make_reply(req, 404, error_body("UnknownSession", "no session " + r.id)), ec);
        return;
      }
      websocket::stream<tcp::socket&> ws(conn->socket);
      ws.accept(req, ec);
      if (!ec) {
        while (!stopping_) {
          std::string msg;
          {
            std::unique_lock lock(box->mu);
            box->cv.wait_for(lock, std::chrono::milliseconds(50), [&] { return !box->queue.empty(); });
            if (!box->queue.empty()) {
              msg = std::move(box->queue.front());
              box->queue.pop_front();
            }
          }
          if (!msg.empty()) {
            ws.text(true);
            ws.write(asio::buffer(msg), ec);
            if (ec) break;
          }
          // the client only ever sends control frames; a readable socket means close or ping
          if (conn->socket.available(ec) > 0) {
            beast::flat_buffer in;
            ws.read(in, ec);
            if (ec) break;
          }
          if (ec) break;
        }
      }
      store_.unsubscribe(r.id, token);
      return;
    }

    Reply res;
    const auto method = req.method();
    if (method == http::verb::options) {
      res = make_reply(req, 204, nullptr);
      res.set(http::field::access_control_allow_methods, "GET, POST, DELETE, OPTIONS");
      res.set(http::field::access_control_allow_headers, "Content-Type");
    } else if (r.kind == Route::Health && method == http::verb::get) {
      res = make_reply(req, 200, {{"ok", true}, {"sessions", store_.size()}});
    } else if (r.kind == Route::Collection && method == http::verb::post) {
      const auto body = parse_body(req);
      if (!body) {
        res = make_reply(req, 400, error_body("InvalidRequest", "body is not valid JSON"));
      } else {
        const Response out = store_.create(*body);
        res = make_reply(req, out.status, out.body);
      }
    } else if (r.kind == Route::Item && method == http::verb::get) {
      const Response out = store_.get(r.id);
      res = make_reply(req, out.status, out.body);
    } else if (r.kind == Route::Item && method == http::verb::delete_) {
      const Response out = store_.remove(r.id);
      res = make_reply(req, out.status, out.body);
    } else if (r.kind == Route::Actions && method == http::verb::post) {
      const auto body = parse_body(req);
      const Response out = store_.post_action(r.id, body ? *body : json());
      res = make_reply(req, out.status, out.body);
    } else if (r.kind == Route::None) {
      res = make_reply(req, 404, error_body("NotFound", "no route for " + std::string(req.target())));
    } else {
      res = make_reply(req, 405, error_body("MethodNotAllowed", "method not allowed on " + std::string(req.target())));
    }

    http::write(conn->socket, res, ec);
    if (ec || !req.keep_alive()) break;
  }
  conn->socket.shutdown(tcp::socket::shutdown_send, ec);
}

}  // namespace lootcrawl::play
