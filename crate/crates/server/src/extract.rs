use axum::body::Bytes;
use axum::extract::{FromRequest, FromRequestParts, Path, Query, Request};
use axum::http::header::CONTENT_TYPE;
use axum::http::request::Parts;
use relis_core::UserId;
use relis_dsl::Rank;
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::error::ApiError;

/// Authenticated caller, resolved by the authorization layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Caller {
    pub user: UserId,
    pub site_admin: bool,
    /// Rank in the project named by the path, if any.
    pub rank: Option<Rank>,
}

/// Bearer token of the request.
#[derive(Clone, Debug)]
pub struct Token(pub String);

impl<S: Send + Sync> FromRequestParts<S> for Caller {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, _: &S) -> Result<Self, ApiError> {
        parts
            .extensions
            .get::<Caller>()
            .copied()
            .ok_or_else(|| ApiError::new("E_BAD_CREDENTIALS", "missing bearer token"))
    }
}

impl<S: Send + Sync> FromRequestParts<S> for Token {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, _: &S) -> Result<Self, ApiError> {
        parts
            .extensions
            .get::<Token>()
            .cloned()
            .ok_or_else(|| ApiError::new("E_BAD_CREDENTIALS", "missing bearer token"))
    }
}

/// JSON body; an empty body reads as `{}`.
pub struct Body<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for Body<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, ApiError> {
        let bytes = Bytes::from_request(req, state)
            .await
            .map_err(|e| ApiError::format(e.body_text()))?;
        let slice: &[u8] = if bytes.trim_ascii().is_empty() { b"{}" } else { &bytes };
        serde_json::from_slice(slice)
            .map(Body)
            .map_err(|e| ApiError::format(format!("invalid JSON body: {e}")))
    }
}

/// UTF-8 text body, e.g. a model source or a corpus file. A JSON body of
/// the form `{"source": "..."}` is accepted as well.
pub struct Text(pub String);

impl<S: Send + Sync> FromRequest<S> for Text {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, ApiError> {
        let json = req
            .headers()
            .get(CONTENT_TYPE)
            .and_then(|v| v.to_str().ok())
            .is_some_and(|v| v.starts_with("application/json"));
        let bytes = Bytes::from_request(req, state)
            .await
            .map_err(|e| ApiError::format(e.body_text()))?;
        if json {
            #[derive(Deserialize)]
            struct Wrapped {
                source: String,
            }
            let w: Wrapped = serde_json::from_slice(&bytes)
                .map_err(|e| ApiError::format(format!("expected {{\"source\": ...}}: {e}")))?;
            return Ok(Text(w.source));
        }
        String::from_utf8(bytes.to_vec())
            .map(Text)
            .map_err(|_| ApiError::format("body is not valid UTF-8"))
    }
}

/// Path parameters; unparseable ids read as missing resources.
pub struct Params<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned + Send> FromRequestParts<S> for Params<T> {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &S) -> Result<Self, ApiError> {
        Path::<T>::from_request_parts(parts, state)
            .await
            .map(|Path(t)| Params(t))
            .map_err(|e| ApiError::new("E_NOT_FOUND", e.body_text()))
    }
}

pub struct Q<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequestParts<S> for Q<T> {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &S) -> Result<Self, ApiError> {
        Query::<T>::from_request_parts(parts, state)
            .await
            .map(|Query(t)| Q(t))
            .map_err(|e| ApiError::format(e.body_text()))
    }
}
