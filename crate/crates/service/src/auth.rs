//! Salted password hashes and store-backed bearer tokens.

use std::sync::Arc;

use chrono::{DateTime, Duration, Utc};
use codepace_core::learning::Clock;
use codepace_core::storage::{Storage, StorageError};
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const NS_USERS: &str = "users";
pub const NS_TOKENS: &str = "tokens";
pub const DEFAULT_PBKDF2_ROUNDS: u32 = 100_000;
pub const TOKEN_TTL_HOURS: i64 = 24;
pub const MIN_PASSWORD_CHARS: usize = 8;

#[derive(Debug, thiserror::Error)]
pub enum AuthError {
    #[error("username must be 3-32 characters of letters, digits, '_', '-' or '.'")]
    InvalidUsername,
    #[error("password must be at least {MIN_PASSWORD_CHARS} characters")]
    WeakPassword,
    #[error("user '{0}' already exists")]
    UserExists(String),
    #[error("invalid username or password")]
    InvalidCredentials,
    #[error("missing, invalid or expired token")]
    Unauthorized,
    #[error(transparent)]
    Storage(#[from] StorageError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserRecord {
    pub user_id: String,
    pub salt: String,
    pub password_hash: String,
    pub rounds: u32,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthToken {
    pub token: String,
    pub user_id: String,
    pub issued_at: DateTime<Utc>,
    pub expires_at: DateTime<Utc>,
}

/// What is persisted for a token: the token itself is never stored, only
/// its SHA-256, so a copied data directory does not leak live sessions.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct StoredToken {
    user_id: String,
    issued_at: DateTime<Utc>,
    expires_at: DateTime<Utc>,
}

fn token_key(token: &str) -> String {
    hex::encode(Sha256::digest(token.as_bytes()))
}

fn hash_password(password: &str, salt: &[u8], rounds: u32) -> [u8; 32] {
    let mut out = [0u8; 32];
    pbkdf2::pbkdf2_hmac::<Sha256>(password.as_bytes(), salt, rounds, &mut out);
    out
}

fn constant_time_eq(a: &[u8], b: &[u8]) -> bool {
    a.len() == b.len() && a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

pub fn valid_username(name: &str) -> bool {
    (3..=32).contains(&name.chars().count())
        && name.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

pub struct AuthService {
    storage: Arc<dyn Storage>,
    clock: Arc<dyn Clock>,
    rounds: u32,
}

impl AuthService {
    pub fn new(storage: Arc<dyn Storage>, clock: Arc<dyn Clock>, rounds: u32) -> Self {
        AuthService {
            storage,
            clock,
            rounds: rounds.max(1),
        }
    }

    pub fn register(&self, username: &str, password: &str) -> Result<UserRecord, AuthError> {
        if !valid_username(username) {
            return Err(AuthError::InvalidUsername);
        }
        if password.chars().count() < MIN_PASSWORD_CHARS {
            return Err(AuthError::WeakPassword);
        }
        let store = self.storage.as_ref();
        if store.get(NS_USERS, username)?.is_some() {
            return Err(AuthError::UserExists(username.to_string()));
        }
        let salt: [u8; 16] = rand::rng().random();
        let record = UserRecord {
            user_id: username.to_string(),
            salt: hex::encode(salt),
            password_hash: hex::encode(hash_password(password, &salt, self.rounds)),
            rounds: self.rounds,
            created_at: self.clock.now(),
        };
        store.put_json(NS_USERS, username, &record)?;
        Ok(record)
    }

    pub fn user(&self, username: &str) -> Result<Option<UserRecord>, AuthError> {
        Ok(self.storage.as_ref().get_json(NS_USERS, username)?)
    }

    pub fn login(&self, username: &str, password: &str) -> Result<AuthToken, AuthError> {
        let record = self.user(username)?.ok_or(AuthError::InvalidCredentials)?;
        let salt = hex::decode(&record.salt).map_err(|_| AuthError::InvalidCredentials)?;
        let expected = hex::decode(&record.password_hash).map_err(|_| AuthError::InvalidCredentials)?;
        if !constant_time_eq(&hash_password(password, &salt, record.rounds), &expected) {
            return Err(AuthError::InvalidCredentials);
        }
        let token = hex::encode(rand::rng().random::<[u8; 16]>());
        let issued_at = self.clock.now();
        let stored = StoredToken {
            user_id: record.user_id.clone(),
            issued_at,
            expires_at: issued_at + Duration::hours(TOKEN_TTL_HOURS),
        };
        self.storage.as_ref().put_json(NS_TOKENS, &token_key(&token), &stored)?;
        Ok(AuthToken {
            token,
            user_id: stored.user_id,
            issued_at: stored.issued_at,
            expires_at: stored.expires_at,
        })
    }

    /// User id owning a live token. Expired tokens are deleted on sight.
    pub fn authenticate(&self, token: &str) -> Result<String, AuthError> {
        if token.is_empty() {
            return Err(AuthError::Unauthorized);
        }
        let key = token_key(token);
        let store = self.storage.as_ref();
        let stored: StoredToken = store.get_json(NS_TOKENS, &key)?.ok_or(AuthError::Unauthorized)?;
        if self.clock.now() >= stored.expires_at {
            store.delete(NS_TOKENS, &key)?;
            return Err(AuthError::Unauthorized);
        }
        Ok(stored.user_id)
    }
}
