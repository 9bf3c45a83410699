//! Hybrid encryption: a fresh AES-256-GCM session key per message, wrapped
//! with RSA-OAEP (SHA-256) under the recipient's public key.

use aes_gcm::aead::{Aead, KeyInit};
use aes_gcm::{Aes256Gcm, Key, Nonce};
use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use rand::RngCore;
use rsa::Oaep;
use serde::{Deserialize, Serialize};
use sha2::Sha256;

use super::{KeyPair, PublicKey, SecurityError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CipherEnvelope {
    pub wrapped_key: String,
    pub iv: String,
    pub ciphertext: String,
}

pub fn encrypt_message(plaintext: &[u8], recipient: &PublicKey) -> Result<CipherEnvelope, SecurityError> {
    if plaintext.is_empty() {
        return Err(SecurityError::EmptyPlaintext);
    }
    let mut rng = rand::thread_rng();
    let mut session = [0u8; 32];
    let mut iv = [0u8; 12];
    rng.fill_bytes(&mut session);
    rng.fill_bytes(&mut iv);

    let cipher = Aes256Gcm::new(Key::<Aes256Gcm>::from_slice(&session));
    let ciphertext = cipher
        .encrypt(Nonce::from_slice(&iv), plaintext)
        .expect("AES-GCM encryption of an in-memory buffer cannot fail");
    let wrapped = recipient.rsa().encrypt(&mut rng, Oaep::new::<Sha256>(), &session)?;

    Ok(CipherEnvelope {
        wrapped_key: B64.encode(wrapped),
        iv: B64.encode(iv),
        ciphertext: B64.encode(ciphertext),
    })
}

/// Every failure (bad encoding, wrong key, tampered data) reports the same
/// `DecryptFailure`.
pub fn decrypt_message(env: &CipherEnvelope, key: &KeyPair) -> Result<Vec<u8>, SecurityError> {
    let fail = |_| SecurityError::DecryptFailure;
    let wrapped = B64.decode(env.wrapped_key.trim()).map_err(fail)?;
    let iv = B64.decode(env.iv.trim()).map_err(fail)?;
    let ciphertext = B64.decode(env.ciphertext.trim()).map_err(fail)?;
    if iv.len() != 12 {
        return Err(SecurityError::DecryptFailure);
    }
    let session = key
        .private()
        .decrypt(Oaep::new::<Sha256>(), &wrapped)
        .map_err(|_| SecurityError::DecryptFailure)?;
    if session.len() != 32 {
        return Err(SecurityError::DecryptFailure);
    }
    Aes256Gcm::new(Key::<Aes256Gcm>::from_slice(&session))
        .decrypt(Nonce::from_slice(&iv), ciphertext.as_ref())
        .map_err(|_| SecurityError::DecryptFailure)
}
