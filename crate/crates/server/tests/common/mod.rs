#![allow(dead_code)]

use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use relis_core::store::Store;
use relis_core::{ProjectId, UserId};
use relis_server::{router, AppState};
use serde_json::Value;
use tower::ServiceExt;

pub const SAMPLE: &str = include_str!("../data/mapping_study.relis");

pub enum Payload {
    Empty,
    Json(Value),
    Text(String),
}

impl From<Value> for Payload {
    fn from(v: Value) -> Self {
        Payload::Json(v)
    }
}

impl From<&str> for Payload {
    fn from(s: &str) -> Self {
        Payload::Text(s.to_string())
    }
}

impl From<String> for Payload {
    fn from(s: String) -> Self {
        Payload::Text(s)
    }
}

impl From<()> for Payload {
    fn from(_: ()) -> Self {
        Payload::Empty
    }
}

#[derive(Debug)]
pub struct Resp {
    pub status: StatusCode,
    pub content_type: Option<String>,
    pub text: String,
}

impl Resp {
    pub fn json(&self) -> Value {
        serde_json::from_str(&self.text).unwrap_or_else(|e| panic!("not JSON ({e}): {}", self.text))
    }

    /// Machine code of an error envelope, empty for other bodies.
    pub fn code(&self) -> String {
        serde_json::from_str::<Value>(&self.text)
            .ok()
            .and_then(|v| v.get("code").and_then(Value::as_str).map(str::to_string))
            .unwrap_or_default()
    }

    #[track_caller]
    pub fn ok(self) -> Value {
        assert!(self.status.is_success(), "{} {}", self.status, self.text);
        if self.text.is_empty() {
            Value::Null
        } else {
            self.json()
        }
    }

    #[track_caller]
    pub fn err(&self, status: u16, code: &str) {
        assert_eq!((self.status.as_u16(), self.code().as_str()), (status, code), "{}", self.text);
    }
}

#[derive(Clone)]
pub struct Api {
    pub app: Router,
    pub state: AppState,
}

impl Api {
    pub fn new() -> Self {
        Self::with_ttl(Duration::from_secs(24 * 3600))
    }

    pub fn with_ttl(ttl: Duration) -> Self {
        Self::on(Store::in_memory(), ttl)
    }

    pub fn on(store: Store, ttl: Duration) -> Self {
        let state = AppState::new(store, ttl);
        Self {
            app: router(state.clone()),
            state,
        }
    }

    pub fn store(&self) -> &Store {
        &self.state.store
    }

    /// Creates a user with password "secret".
    pub fn user(&self, login: &str) -> UserId {
        self.store().create_user(login, login, "secret", false).unwrap()
    }

    /// Opens a session without going through the password check.
    pub fn token(&self, user: UserId) -> String {
        self.state.sessions.issue(user).0
    }

    pub async fn call(&self, method: &str, uri: &str, token: Option<&str>, body: impl Into<Payload>) -> Resp {
        let mut req = Request::builder().method(method).uri(uri);
        if let Some(t) = token {
            req = req.header("authorization", format!("Bearer {t}"));
        }
        let req = match body.into() {
            Payload::Empty => req.body(Body::empty()),
            Payload::Json(v) => req
                .header("content-type", "application/json")
                .body(Body::from(v.to_string())),
            Payload::Text(s) => req.header("content-type", "text/plain").body(Body::from(s)),
        }
        .unwrap();
        let resp = self.app.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let content_type = resp
            .headers()
            .get("content-type")
            .and_then(|v| v.to_str().ok())
            .map(str::to_string);
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        Resp {
            status,
            content_type,
            text: String::from_utf8(bytes.to_vec()).unwrap(),
        }
    }

    pub async fn get(&self, uri: &str, token: &str) -> Resp {
        self.call("GET", uri, Some(token), ()).await
    }

    pub async fn post(&self, uri: &str, token: &str, body: impl Into<Payload>) -> Resp {
        self.call("POST", uri, Some(token), body).await
    }

    pub async fn put(&self, uri: &str, token: &str, body: impl Into<Payload>) -> Resp {
        self.call("PUT", uri, Some(token), body).await
    }

    pub async fn delete(&self, uri: &str, token: &str) -> Resp {
        self.call("DELETE", uri, Some(token), ()).await
    }

    /// Installs `source` as a new project owned by a fresh user.
    pub async fn install(&self, source: &str) -> Project {
        let owner = self.user(&format!("owner{}", self.store().users().len()));
        let token = self.token(owner);
        let v = self.post("/projects", &token, source).await.ok();
        let id = ProjectId(v["project"]["id"].as_u64().unwrap());
        Project { id, owner, token }
    }
}

pub struct Project {
    pub id: ProjectId,
    pub owner: UserId,
    /// Session of the owner.
    pub token: String,
}

impl Project {
    pub fn url(&self, rest: &str) -> String {
        format!("/projects/{}{rest}", self.id)
    }
}

/// A CSV corpus of `n` distinct papers.
pub fn corpus(n: usize) -> String {
    let mut out = String::from("bibkey,title,authors,venue,year,abstract,link\n");
    for i in 0..n {
        out.push_str(&format!(
            "key{i},Paper number {i},Ann Author;Bob Writer,Venue {i},{},Abstract {i},https://example.org/{i}\n",
            2000 + i % 20
        ));
    }
    out
}
