//! Message-level security: per-service RSA keypairs, message signatures,
//! hybrid encryption and self-signed certificates.

mod cert;
mod cipher;
mod store;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use rsa::traits::PublicKeyParts;
use rsa::{BigUint, Pkcs1v15Sign, RsaPrivateKey, RsaPublicKey};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use cert::{
    issue_certificate, issue_certificate_at, parse_certificate_text, render_certificate_text, Certificate,
    DEFAULT_VALIDITY_DAYS,
};
pub use cipher::{decrypt_message, encrypt_message, CipherEnvelope};
pub use store::KeyStore;

pub const DEFAULT_KEY_BITS: usize = 2048;
pub const SUPPORTED_KEY_BITS: [usize; 3] = [2048, 3072, 4096];
pub const SIGNATURE_ALGORITHM: &str = "RSA-PKCS1-v1_5";
pub const DIGEST_ALGORITHM: &str = "SHA-256";

#[derive(Debug, thiserror::Error)]
pub enum SecurityError {
    #[error("unsupported key size {0} (use 2048, 3072 or 4096)")]
    UnsupportedKeySize(usize),
    #[error("malformed signature: {0}")]
    MalformedSignature(String),
    #[error("plaintext must not be empty")]
    EmptyPlaintext,
    #[error("decryption failed")]
    DecryptFailure,
    #[error("malformed certificate: {0}")]
    MalformedCertificate(String),
    #[error("key store: {0}")]
    KeyStore(String),
    #[error("key `{0}` already exists")]
    KeyExists(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("RSA failure: {0}")]
    Rsa(#[from] rsa::Error),
}

/// RSA public key; the modulus and exponent printed in certificates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublicKey(RsaPublicKey);

impl PublicKey {
    pub fn from_components(modulus: BigUint, exponent: BigUint) -> Result<Self, SecurityError> {
        Ok(PublicKey(RsaPublicKey::new(modulus, exponent)?))
    }

    pub fn modulus(&self) -> &BigUint {
        self.0.n()
    }

    pub fn exponent(&self) -> &BigUint {
        self.0.e()
    }

    /// Modulus length in bytes; also the signature length.
    pub fn size(&self) -> usize {
        self.0.size()
    }

    pub fn bits(&self) -> usize {
        self.0.n().bits()
    }

    pub(crate) fn rsa(&self) -> &RsaPublicKey {
        &self.0
    }
}

pub struct KeyPair {
    private: RsaPrivateKey,
    public: PublicKey,
}

impl std::fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KeyPair").field("bits", &self.bits()).finish_non_exhaustive()
    }
}

impl KeyPair {
    /// Fresh keypair with public exponent 65537.
    pub fn generate(bits: usize) -> Result<Self, SecurityError> {
        if !SUPPORTED_KEY_BITS.contains(&bits) {
            return Err(SecurityError::UnsupportedKeySize(bits));
        }
        let private = RsaPrivateKey::new(&mut rand::thread_rng(), bits)?;
        Ok(KeyPair::from_private(private))
    }

    pub(crate) fn from_private(private: RsaPrivateKey) -> Self {
        let public = PublicKey(private.to_public_key());
        KeyPair { private, public }
    }

    pub fn public_key(&self) -> &PublicKey {
        &self.public
    }

    pub fn bits(&self) -> usize {
        self.public.bits()
    }

    pub(crate) fn private(&self) -> &RsaPrivateKey {
        &self.private
    }
}

/// Detached signature as carried in the `Signature` header entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignatureBlock {
    pub algorithm: String,
    pub digest_algorithm: String,
    pub value: String,
}

impl SignatureBlock {
    pub fn decode(&self) -> Result<Vec<u8>, SecurityError> {
        B64.decode(self.value.trim())
            .map_err(|e| SecurityError::MalformedSignature(e.to_string()))
    }
}

pub(crate) fn raw_sign(message: &[u8], key: &KeyPair) -> Vec<u8> {
    let digest = Sha256::digest(message);
    key.private
        .sign(Pkcs1v15Sign::new::<Sha256>(), &digest)
        .expect("PKCS#1 v1.5 signing with a valid key cannot fail")
}

pub(crate) fn raw_verify(message: &[u8], signature: &[u8], key: &PublicKey) -> bool {
    if signature.len() != key.size() {
        return false;
    }
    let digest = Sha256::digest(message);
    key.0.verify(Pkcs1v15Sign::new::<Sha256>(), &digest, signature).is_ok()
}

pub fn sign_message(message: &[u8], key: &KeyPair) -> SignatureBlock {
    SignatureBlock {
        algorithm: SIGNATURE_ALGORITHM.into(),
        digest_algorithm: DIGEST_ALGORITHM.into(),
        value: B64.encode(raw_sign(message, key)),
    }
}

/// `Err` only when the signature value is not decodable; every other
/// mismatch is `Ok(false)`.
pub fn verify_signature(message: &[u8], sig: &SignatureBlock, key: &PublicKey) -> Result<bool, SecurityError> {
    let bytes = sig.decode()?;
    if sig.algorithm != SIGNATURE_ALGORITHM || sig.digest_algorithm != DIGEST_ALGORITHM {
        return Ok(false);
    }
    Ok(raw_verify(message, &bytes, key))
}

#[cfg(test)]
pub(crate) mod test_keys {
    use std::sync::OnceLock;

    use super::KeyPair;

    /// Two shared 2048-bit keys; generation is the slow part of these tests.
    pub fn pair() -> &'static (KeyPair, KeyPair) {
        static KEYS: OnceLock<(KeyPair, KeyPair)> = OnceLock::new();
        KEYS.get_or_init(|| (KeyPair::generate(2048).unwrap(), KeyPair::generate(2048).unwrap()))
    }
}
