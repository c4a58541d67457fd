use futures_util::{SinkExt, StreamExt};
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{MaybeTlsStream, WebSocketStream};
use zelig::service::{Service, ServiceConfig};
use zelig::wire::{ServerFrame, SessionCreated, WireError, WireUpdate};

pub const WAIT: Duration = Duration::from_secs(10);

pub struct Server {
    pub addr: SocketAddr,
    pub svc: Arc<Service>,
}

pub async fn start(config: ServiceConfig) -> Server {
    let svc = Service::new(super::drunk_keys(), config).unwrap();
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(zelig::service::serve(listener, svc.clone()));
    Server { addr, svc }
}

/// No ticker, long grace: the test drives the clock.
pub fn manual() -> ServiceConfig {
    ServiceConfig { tick: None, grace: Duration::from_secs(600), ..ServiceConfig::default() }
}

pub fn ticking(ms: u64) -> ServiceConfig {
    ServiceConfig { tick: Some(Duration::from_millis(ms)), ..manual() }
}

/// One HTTP/1.1 request on a fresh connection; returns status and body.
pub async fn http(addr: SocketAddr, method: &str, path: &str, body: Option<&str>) -> (u16, String) {
    let mut stream = TcpStream::connect(addr).await.unwrap();
    let body = body.unwrap_or("");
    let ctype = if body.is_empty() { String::new() } else { "Content-Type: application/json\r\n".into() };
    let req = format!(
        "{method} {path} HTTP/1.1\r\nHost: {addr}\r\n{ctype}Content-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
    stream.write_all(req.as_bytes()).await.unwrap();
    let mut raw = Vec::new();
    tokio::time::timeout(WAIT, stream.read_to_end(&mut raw)).await.unwrap().unwrap();
    let text = String::from_utf8(raw).unwrap();
    let (head, rest) = text.split_once("\r\n\r\n").unwrap();
    let status = head.split_whitespace().nth(1).unwrap().parse().unwrap();
    assert!(!head.to_ascii_lowercase().contains("transfer-encoding: chunked"), "unexpected chunked body");
    (status, rest.to_string())
}

pub async fn create(addr: SocketAddr) -> String {
    let (status, body) = http(addr, "POST", "/sessions", None).await;
    assert_eq!(status, 201, "{body}");
    serde_json::from_str::<SessionCreated>(&body).unwrap().session_id
}

pub async fn get_log(addr: SocketAddr, id: &str) -> String {
    let (status, body) = http(addr, "GET", &format!("/sessions/{id}/log"), None).await;
    assert_eq!(status, 200, "{body}");
    body
}

pub async fn get_trace(addr: SocketAddr, id: &str) -> String {
    let (status, body) = http(addr, "GET", &format!("/sessions/{id}/trace"), None).await;
    assert_eq!(status, 200, "{body}");
    body
}

pub struct Client {
    ws: WebSocketStream<MaybeTlsStream<TcpStream>>,
}

impl Client {
    /// Connects and consumes the initial snapshot update.
    pub async fn connect(addr: SocketAddr, id: &str) -> (Self, WireUpdate) {
        let mut c = Self::connect_raw(addr, id).await;
        let hello = c.update().await;
        (c, hello)
    }

    pub async fn connect_raw(addr: SocketAddr, id: &str) -> Self {
        let (ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/sessions/{id}/play")).await.unwrap();
        Client { ws }
    }

    pub async fn send(&mut self, text: &str) {
        self.ws.send(Message::Text(text.to_string())).await.unwrap();
    }

    pub async fn frame(&mut self) -> ServerFrame {
        loop {
            let msg = tokio::time::timeout(WAIT, self.ws.next()).await.expect("no frame in time").unwrap().unwrap();
            if let Message::Text(t) = msg {
                return serde_json::from_str(&t).unwrap_or_else(|e| panic!("bad frame {t}: {e}"));
            }
        }
    }

    pub async fn update(&mut self) -> WireUpdate {
        match self.frame().await {
            ServerFrame::Update(u) => u,
            ServerFrame::Error(e) => panic!("expected update, got {e:?}"),
        }
    }

    pub async fn error(&mut self) -> WireError {
        loop {
            if let ServerFrame::Error(e) = self.frame().await {
                return e;
            }
        }
    }

    /// Reads updates until one satisfies `pred`.
    pub async fn until(&mut self, pred: impl Fn(&WireUpdate) -> bool) -> WireUpdate {
        loop {
            let u = self.update().await;
            if pred(&u) {
                return u;
            }
        }
    }

    pub async fn close(mut self) {
        let _ = self.ws.close(None).await;
    }
}

/// Plays the proactive path live with the ticker running, then returns the
/// served trace and log.
pub async fn proactive_live_session(server: &Server) -> (String, String) {
    let id = create(server.addr).await;
    let (mut c, _) = Client::connect(server.addr, &id).await;
    c.until(|u| u.step == "SS2").await;
    c.send(r#"{"kind":"utterance","payload":"What's going on?"}"#).await;
    c.until(|u| u.step == "SS3").await;
    c.until(|u| u.t >= 3).await;
    c.send(r#"{"kind":"move","payload":"searching"}"#).await;
    c.until(|u| u.step == "SS4").await;
    c.until(|u| u.t >= 6).await;
    c.send(r#"{"kind":"utterance","payload":"Are you sure you lost them over here?"}"#).await;
    c.until(|u| u.status == zelig::runtime::Status::Ended).await;
    c.close().await;
    (get_trace(server.addr, &id).await, get_log(server.addr, &id).await)
}
