#pragma once

// Authenticated encryption for billing logs: AES-256-GCM through OpenSSL.
// The 16-byte tag rides at the end of the ciphertext, so any bit flip in
// nonce, ciphertext, or tag fails authentication.

#include <array>
#include <cstdint>
#include <string>

#include <openssl/evp.h>
#include <openssl/rand.h>

#include "agora/error.hpp"

namespace agora::billing {

constexpr size_t kKeyBytes = 32;
constexpr size_t kNonceBytes = 12;
constexpr size_t kTagBytes = 16;

using AeadKey = std::array<std::uint8_t, kKeyBytes>;
using Nonce = std::array<std::uint8_t, kNonceBytes>;

namespace detail {

struct CipherCtx {
  EVP_CIPHER_CTX* ctx;
  CipherCtx() : ctx(EVP_CIPHER_CTX_new()) {
    if (!ctx) fail(ErrorCode::IoError, "EVP_CIPHER_CTX_new failed");
  }
  ~CipherCtx() { EVP_CIPHER_CTX_free(ctx); }
  CipherCtx(const CipherCtx&) = delete;
  CipherCtx& operator=(const CipherCtx&) = delete;
};

}  // namespace detail

// ciphertext || tag
inline std::string aead_seal(const AeadKey& key, const Nonce& nonce,
                             const std::string& plaintext) {
  detail::CipherCtx c;
  if (EVP_EncryptInit_ex(c.ctx, EVP_aes_256_gcm(), nullptr, key.data(),
                         nonce.data()) != 1) {
    fail(ErrorCode::IoError, "gcm encrypt init failed");
  }
  std::string out(plaintext.size() + kTagBytes, '\0');
  int len = 0;
  if (EVP_EncryptUpdate(c.ctx, reinterpret_cast<unsigned char*>(out.data()),
                        &len,
                        reinterpret_cast<const unsigned char*>(plaintext.data()),
                        static_cast<int>(plaintext.size())) != 1) {
    fail(ErrorCode::IoError, "gcm encrypt failed");
  }
  int fin = 0;
  if (EVP_EncryptFinal_ex(c.ctx,
                          reinterpret_cast<unsigned char*>(out.data()) + len,
                          &fin) != 1) {
    fail(ErrorCode::IoError, "gcm encrypt final failed");
  }
  if (EVP_CIPHER_CTX_ctrl(c.ctx, EVP_CTRL_GCM_GET_TAG, kTagBytes,
                          out.data() + plaintext.size()) != 1) {
    fail(ErrorCode::IoError, "gcm get tag failed");
  }
  return out;
}

inline std::string aead_open(const AeadKey& key, const Nonce& nonce,
                             const std::string& sealed) {
  if (sealed.size() < kTagBytes) {
    fail(ErrorCode::AuthFailure, "sealed blob shorter than tag");
  }
  const size_t ct_len = sealed.size() - kTagBytes;
  detail::CipherCtx c;
  if (EVP_DecryptInit_ex(c.ctx, EVP_aes_256_gcm(), nullptr, key.data(),
                         nonce.data()) != 1) {
    fail(ErrorCode::IoError, "gcm decrypt init failed");
  }
  std::string out(ct_len, '\0');
  int len = 0;
  if (EVP_DecryptUpdate(c.ctx, reinterpret_cast<unsigned char*>(out.data()),
                        &len,
                        reinterpret_cast<const unsigned char*>(sealed.data()),
                        static_cast<int>(ct_len)) != 1) {
    fail(ErrorCode::AuthFailure, "gcm decrypt failed");
  }
  std::array<unsigned char, kTagBytes> tag;
  std::copy(sealed.begin() + static_cast<std::ptrdiff_t>(ct_len), sealed.end(),
            tag.begin());
  if (EVP_CIPHER_CTX_ctrl(c.ctx, EVP_CTRL_GCM_SET_TAG, kTagBytes,
                          tag.data()) != 1) {
    fail(ErrorCode::IoError, "gcm set tag failed");
  }
  int fin = 0;
  if (EVP_DecryptFinal_ex(c.ctx,
                          reinterpret_cast<unsigned char*>(out.data()) + len,
                          &fin) != 1) {
    fail(ErrorCode::AuthFailure, "authentication failed");
  }
  return out;
}

inline void random_bytes(std::uint8_t* buf, size_t n) {
  if (RAND_bytes(buf, static_cast<int>(n)) != 1) {
    fail(ErrorCode::IoError, "RAND_bytes failed");
  }
}

}  // namespace agora::billing
