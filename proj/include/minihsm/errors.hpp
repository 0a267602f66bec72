#pragma once

#include <stdexcept>
#include <string>

namespace minihsm {

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// aes
class PaddingError : public Error { public: explicit PaddingError(const std::string& m = "invalid padding") : Error(m) {} };
class LengthError : public Error { public: explicit LengthError(const std::string& m = "input length not a multiple of the block size") : Error(m) {} };

// rsa
class InvalidModulus : public Error { public: explicit InvalidModulus(const std::string& m = "modulus must be > 1") : Error(m) {} };
class NotInvertible : public Error { public: explicit NotInvertible(const std::string& m = "value has no modular inverse") : Error(m) {} };
class MessageTooLarge : public Error { public: explicit MessageTooLarge(const std::string& m = "message not below modulus") : Error(m) {} };
class ExponentClash : public Error { public: explicit ExponentClash(const std::string& m = "public exponent shares a factor with phi(n)") : Error(m) {} };
class KeyTooLargeForModulus : public Error { public: explicit KeyTooLargeForModulus(const std::string& m = "payload does not fit under the modulus") : Error(m) {} };
class PemSyntax : public Error { public: explicit PemSyntax(const std::string& m = "malformed PEM block") : Error(m) {} };
class PemMagic : public Error { public: explicit PemMagic(const std::string& m = "PEM payload has wrong magic") : Error(m) {} };
class PemType : public Error { public: explicit PemType(const std::string& m = "PEM key type mismatch") : Error(m) {} };

// envelope
class WrongKey : public Error { public: explicit WrongKey(const std::string& m = "private key does not match envelope") : Error(m) {} };
class CorruptCiphertext : public Error { public: explicit CorruptCiphertext(const std::string& m = "ciphertext failed to decrypt") : Error(m) {} };
class DigestMismatch : public Error { public: explicit DigestMismatch(const std::string& m = "plaintext digest mismatch") : Error(m) {} };
class EnvelopeMagic : public Error { public: explicit EnvelopeMagic(const std::string& m = "not an envelope file") : Error(m) {} };
class EnvelopeTruncated : public Error { public: explicit EnvelopeTruncated(const std::string& m = "envelope truncated") : Error(m) {} };
class EnvelopeVersion : public Error { public: explicit EnvelopeVersion(const std::string& m = "unsupported envelope version") : Error(m) {} };

// token store
class DuplicateSlotLabel : public Error { public: explicit DuplicateSlotLabel(const std::string& m = "slot label already in use") : Error(m) {} };
class WeakPin : public Error { public: explicit WeakPin(const std::string& m = "PIN shorter than 4 bytes") : Error(m) {} };
class AuthFailure : public Error { public: explicit AuthFailure(const std::string& m = "authentication failed") : Error(m) {} };
class UnknownSlot : public Error { public: explicit UnknownSlot(const std::string& m = "no such slot") : Error(m) {} };
class UnknownKey : public Error { public: explicit UnknownKey(const std::string& m = "no such key") : Error(m) {} };
class RoleDenied : public Error { public: explicit RoleDenied(const std::string& m = "operation not permitted for this role") : Error(m) {} };
class DuplicateKeyLabel : public Error { public: explicit DuplicateKeyLabel(const std::string& m = "key label already in use") : Error(m) {} };
class TokenMagic : public Error { public: explicit TokenMagic(const std::string& m = "not a token file") : Error(m) {} };
class TokenTruncated : public Error { public: explicit TokenTruncated(const std::string& m = "token file truncated") : Error(m) {} };
class TokenVersion : public Error { public: explicit TokenVersion(const std::string& m = "unsupported token file version") : Error(m) {} };

// io / bench
class IoError : public Error { public: explicit IoError(const std::string& m = "I/O error") : Error(m) {} };
class MeasurementUnsupported : public Error { public: explicit MeasurementUnsupported(const std::string& m = "platform exposes no process accounting") : Error(m) {} };

}  // namespace minihsm
