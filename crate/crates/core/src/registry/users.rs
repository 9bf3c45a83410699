use std::collections::BTreeSet;

use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Member of `allowed_services` granting every service.
pub const ANY_SERVICE: &str = "*";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessDecision {
    Allow,
    Deny,
}

/// A consumer account. Only a salted digest of the password is kept:
/// `SHA-256(salt || SHA-256(password))`, where the inner hash is the proof a
/// consumer sends in its `Auth` header.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct UserRecord {
    pub login: String,
    #[serde(with = "hex::serde")]
    pub salt: [u8; 16],
    pub password_digest: String,
    pub device_id: String,
    pub allowed_services: BTreeSet<String>,
}

/// Hex SHA-256 of the password, as carried on the wire.
pub fn password_proof(password: &str) -> String {
    hex::encode(Sha256::digest(password.as_bytes()))
}

fn salted_digest(salt: &[u8; 16], proof: &[u8]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(salt);
    h.update(proof);
    h.finalize().into()
}

impl UserRecord {
    pub fn new<I, S>(login: &str, password: &str, device_id: &str, services: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut salt = [0u8; 16];
        rand::thread_rng().fill_bytes(&mut salt);
        let proof = Sha256::digest(password.as_bytes());
        UserRecord {
            login: login.to_string(),
            salt,
            password_digest: hex::encode(salted_digest(&salt, &proof)),
            device_id: device_id.to_string(),
            allowed_services: services.into_iter().map(Into::into).collect(),
        }
    }

    pub fn may_use(&self, service: &str) -> bool {
        self.allowed_services.contains(ANY_SERVICE) || self.allowed_services.contains(service)
    }

    /// Check a hex proof (see [`password_proof`]) against the stored digest.
    pub fn proof_matches(&self, proof_hex: &str) -> bool {
        let (Ok(proof), Ok(stored)) = (hex::decode(proof_hex.trim()), hex::decode(&self.password_digest)) else {
            return false;
        };
        if proof.len() != 32 || stored.len() != 32 {
            return false;
        }
        let computed = salted_digest(&self.salt, &proof);
        computed.iter().zip(&stored).fold(0u8, |acc, (a, b)| acc | (a ^ b)) == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn salts_differ_and_plaintext_is_absent() {
        let a = UserRecord::new("aluno1", "sentinel-pw", "dev1", ["CadastroEscolar"]);
        let b = UserRecord::new("aluno1", "sentinel-pw", "dev1", ["CadastroEscolar"]);
        assert_ne!(a.salt, b.salt);
        assert_ne!(a.password_digest, b.password_digest);
        let json = serde_json::to_string(&a).unwrap();
        assert!(!json.contains("sentinel-pw"));
        assert_eq!(a.password_digest.len(), 64);
    }

    #[test]
    fn proof_check() {
        let u = UserRecord::new("u", "pw", "d", ["S"]);
        assert!(u.proof_matches(&password_proof("pw")));
        assert!(!u.proof_matches(&password_proof("pw2")));
        assert!(!u.proof_matches("not hex"));
        assert!(!u.proof_matches("abcd"));
    }

    #[test]
    fn wildcard() {
        let u = UserRecord::new("u", "pw", "d", [ANY_SERVICE]);
        assert!(u.may_use("Anything"));
        let u = UserRecord::new("u", "pw", "d", ["A"]);
        assert!(u.may_use("A") && !u.may_use("B"));
    }
}
