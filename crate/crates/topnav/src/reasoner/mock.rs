//! In-process HTTP fixture that speaks the remote-reasoner wire protocol,
//! for exercising the client without a hosted model.

use std::net::TcpListener;
use std::sync::{Arc, Mutex};

use axum::routing::post;
use axum::{Json, Router};
use tokio::sync::oneshot;

use super::{WireRequest, WireResponse};

/// Maps each incoming request to the text the "model" replies with.
pub type Responder = dyn Fn(&WireRequest) -> String + Send + Sync;

/// A tiny HTTP server answering the reasoner wire protocol on an ephemeral
/// local port. Shuts down when dropped. Received requests are recorded for
/// assertions.
pub struct MockServer {
    url: String,
    requests: Arc<Mutex<Vec<WireRequest>>>,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl MockServer {
    /// Start a server whose reply text is computed by `responder`.
    pub fn spawn(responder: impl Fn(&WireRequest) -> String + Send + Sync + 'static) -> Self {
        let responder: Arc<Responder> = Arc::new(responder);
        let requests: Arc<Mutex<Vec<WireRequest>>> = Arc::new(Mutex::new(Vec::new()));
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind ephemeral port");
        let addr = listener.local_addr().expect("listener has an address");
        listener
            .set_nonblocking(true)
            .expect("nonblocking listener for tokio");
        let (tx, rx) = oneshot::channel::<()>();

        let log = requests.clone();
        let thread = std::thread::spawn(move || {
            let rt = tokio::runtime::Builder::new_current_thread()
                .enable_io()
                .build()
                .expect("tokio runtime");
            rt.block_on(async move {
                let app = Router::new().route(
                    "/",
                    post(move |Json(req): Json<WireRequest>| {
                        let responder = responder.clone();
                        let log = log.clone();
                        async move {
                            let text = responder(&req);
                            log.lock().expect("request log poisoned").push(req);
                            Json(WireResponse { text })
                        }
                    }),
                );
                let listener =
                    tokio::net::TcpListener::from_std(listener).expect("adopt listener");
                axum::serve(listener, app)
                    .with_graceful_shutdown(async {
                        let _ = rx.await;
                    })
                    .await
                    .expect("mock server");
            });
        });

        Self {
            url: format!("http://{addr}/"),
            requests,
            shutdown: Some(tx),
            thread: Some(thread),
        }
    }

    /// Start a server that replies with a fixed text regardless of role.
    pub fn fixed(text: impl Into<String>) -> Self {
        let text = text.into();
        Self::spawn(move |_| text.clone())
    }

    /// Endpoint URL for [`super::RemoteConfig`].
    pub fn url(&self) -> &str {
        &self.url
    }

    /// Snapshot of the requests received so far.
    pub fn received(&self) -> Vec<WireRequest> {
        self.requests.lock().expect("request log poisoned").clone()
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}
