use std::collections::HashMap;
use std::time::Duration;

use chrono::{DateTime, TimeDelta, Utc};
use parking_lot::RwLock;
use rand::RngCore;
use relis_core::{Error, Result, UserId};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Session {
    pub user: UserId,
    pub created_at: DateTime<Utc>,
    pub expires_at: DateTime<Utc>,
}

#[derive(Clone, Debug)]
struct Entry {
    session: Session,
    revoked: bool,
}

/// Bearer-token sessions. Only token digests are kept, so the table does
/// not leak usable tokens and lookups do not compare secrets.
pub struct Sessions {
    ttl: TimeDelta,
    table: RwLock<HashMap<[u8; 32], Entry>>,
}

fn digest(token: &str) -> [u8; 32] {
    Sha256::digest(token.as_bytes()).into()
}

impl Sessions {
    pub fn new(ttl: Duration) -> Self {
        Self {
            ttl: TimeDelta::from_std(ttl).unwrap_or(TimeDelta::MAX),
            table: RwLock::new(HashMap::new()),
        }
    }

    /// Opens a session for `user` and returns its token: 128 random bits,
    /// hex encoded.
    pub fn issue(&self, user: UserId) -> (String, Session) {
        let mut raw = [0u8; 16];
        rand::rng().fill_bytes(&mut raw);
        let token = hex::encode(raw);
        let now = Utc::now();
        let session = Session {
            user,
            created_at: now,
            expires_at: now.checked_add_signed(self.ttl).unwrap_or(DateTime::<Utc>::MAX_UTC),
        };
        let mut table = self.table.write();
        // Dead entries are kept for one more TTL so late callers still learn
        // that their token expired.
        let horizon = now.checked_sub_signed(self.ttl).unwrap_or(DateTime::<Utc>::MIN_UTC);
        table.retain(|_, e| e.session.expires_at > horizon);
        table.insert(
            digest(&token),
            Entry {
                session: session.clone(),
                revoked: false,
            },
        );
        (token, session)
    }

    pub fn resolve(&self, token: &str) -> Result<Session> {
        match self.table.read().get(&digest(token)) {
            None => Err(Error::BadCredentials),
            Some(e) if e.revoked || e.session.expires_at <= Utc::now() => Err(Error::Expired),
            Some(e) => Ok(e.session.clone()),
        }
    }

    /// Ends a session immediately.
    pub fn revoke(&self, token: &str) -> Result<()> {
        match self.table.write().get_mut(&digest(token)) {
            None => Err(Error::BadCredentials),
            Some(e) if e.revoked => Err(Error::Expired),
            Some(e) => {
                e.revoked = true;
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokens_are_distinct_128_bit_hex() {
        let s = Sessions::new(Duration::from_secs(60));
        let (a, _) = s.issue(UserId(1));
        let (b, _) = s.issue(UserId(1));
        assert_ne!(a, b);
        assert_eq!(a.len(), 32);
        assert!(a.chars().all(|c| c.is_ascii_hexdigit()));
        assert_eq!(s.resolve(&a).unwrap().user, UserId(1));
        assert_eq!(s.resolve(&b).unwrap().user, UserId(1));
    }

    #[test]
    fn revoked_and_expired_tokens_fail() {
        let s = Sessions::new(Duration::from_secs(60));
        let (t, _) = s.issue(UserId(2));
        s.revoke(&t).unwrap();
        assert_eq!(s.resolve(&t).unwrap_err().code(), "E_EXPIRED");
        assert_eq!(s.resolve("nope").unwrap_err().code(), "E_BAD_CREDENTIALS");

        let s = Sessions::new(Duration::ZERO);
        let (t, _) = s.issue(UserId(3));
        assert_eq!(s.resolve(&t).unwrap_err().code(), "E_EXPIRED");
    }
}
