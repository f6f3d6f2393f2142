#include "promim/prompting.hpp"

#include <cmath>

#include "promim/error.hpp"

namespace promim {

namespace {

constexpr std::string_view kModule = "prompting";

std::vector<std::vector<TokenId>> class_token_lists(const DualEncoder& encoder,
                                                    const std::vector<std::string>& classes) {
  if (classes.empty()) raise(ErrorKind::kInput, kModule, "empty class list");
  std::vector<std::vector<TokenId>> out;
  out.reserve(classes.size());
  const Vocabulary& vocab = encoder.vocabulary();
  for (const std::string& name : classes) {
    if (!vocab.contains(name) || name == kEndOfText) {
      raise(ErrorKind::kInput, kModule, "class '" + name + "' is not in the vocabulary");
    }
    out.push_back(vocab.tokenize(name));
  }
  return out;
}

}  // namespace

std::string_view to_string(PromptMethod method) {
  switch (method) {
    case PromptMethod::kHandcrafted:
      return "handcrafted";
    case PromptMethod::kCoop:
      return "coop";
    case PromptMethod::kCocoop:
      return "cocoop";
    case PromptMethod::kPromim:
      return "promim";
  }
  return "unknown";
}

PromptMethod parse_prompt_method(std::string_view name) {
  if (name == "handcrafted") return PromptMethod::kHandcrafted;
  if (name == "coop") return PromptMethod::kCoop;
  if (name == "cocoop") return PromptMethod::kCocoop;
  if (name == "promim") return PromptMethod::kPromim;
  raise(ErrorKind::kInput, kModule, "unknown prompt method '" + std::string(name) + "'");
}

ContextTokens ContextTokens::gaussian(std::size_t count, std::size_t embed_dim, Rng& rng,
                                      double stddev) {
  if (count == 0) raise(ErrorKind::kInput, kModule, "need at least one context token");
  std::vector<double> v(count * embed_dim);
  for (double& x : v) x = rng.normal(0.0, stddev);
  return {Tensor::from_data({count, embed_dim}, std::move(v), true)};
}

MetaNet MetaNet::initialize(std::size_t input_dim, std::size_t embed_dim, Rng& rng,
                            std::size_t reduction) {
  if (reduction == 0 || input_dim / reduction == 0) {
    raise(ErrorKind::kInput, kModule, "meta-net reduction leaves no hidden units");
  }
  const std::size_t hidden = input_dim / reduction;
  std::vector<double> w1(input_dim * hidden);
  const double s = 1.0 / std::sqrt(static_cast<double>(input_dim));
  for (double& x : w1) x = rng.normal(0.0, s);
  MetaNet net;
  net.reduction = reduction;
  net.w1 = Tensor::from_data({input_dim, hidden}, std::move(w1), true);
  net.b1 = Tensor::zeros({hidden}, true);
  net.w2 = Tensor::zeros({hidden, embed_dim}, true);
  net.b2 = Tensor::zeros({embed_dim}, true);
  return net;
}

Tensor meta_forward(const MetaNet& net, const Tensor& image_embedding) {
  if (image_embedding.numel() != net.input_dim()) {
    raise(ErrorKind::kDimension, kModule,
          "meta-net expects an embedding of " + std::to_string(net.input_dim()) + ", got " +
              shape_string(image_embedding.shape()));
  }
  const Tensor x = reshape(image_embedding, {1, net.input_dim()});
  const Tensor hidden = relu(linear(x, net.w1, net.b1));
  return reshape(linear(hidden, net.w2, net.b2), {net.output_dim()});
}

PromptSet assemble_prompts(const DualEncoder& encoder, const ContextTokens& ctx,
                           const std::optional<Tensor>& meta_token,
                           const std::vector<std::string>& classes, PromptMethod method) {
  const std::size_t E = encoder.config().embed_dim;
  if (ctx.vectors.rank() != 2 || ctx.vectors.dim(1) != E) {
    raise(ErrorKind::kDimension, kModule, "context tokens must be [M, " + std::to_string(E) + "]");
  }
  PromptSet ps;
  ps.method = method;
  if (meta_token) {
    if (meta_token->numel() != E) {
      raise(ErrorKind::kDimension, kModule,
            "meta-token has " + std::to_string(meta_token->numel()) + " values, expected " +
                std::to_string(E));
    }
    ps.prefix = add_row(ctx.vectors, reshape(*meta_token, {E}));
  } else {
    ps.prefix = ctx.vectors;
  }
  ps.class_names = classes;
  ps.class_tokens = class_token_lists(encoder, classes);
  return ps;
}

PromptSet handcrafted_prompts(const DualEncoder& encoder, const std::vector<std::string>& classes) {
  const Vocabulary& vocab = encoder.vocabulary();
  std::string head(kPromptTemplate);
  head = head.substr(0, head.find(kClassPlaceholder));
  const auto words = vocab.tokenize(head);
  std::vector<std::size_t> rows(words.begin(), words.end());
  PromptSet ps;
  ps.method = PromptMethod::kHandcrafted;
  {
    NoGradGuard no_grad;
    ps.prefix = gather_rows(encoder.text().token_embedding, rows).detach();
  }
  ps.class_names = classes;
  ps.class_tokens = class_token_lists(encoder, classes);
  return ps;
}

ReferenceEmbeddings compute_reference_embeddings(const DualEncoder& encoder,
                                                 const std::vector<std::string>& classes,
                                                 bool normalized) {
  std::vector<std::vector<TokenId>> seqs;
  seqs.reserve(classes.size());
  for (const std::string& name : classes) {
    try {
      seqs.push_back(embed_template(encoder.vocabulary(), name));
    } catch (const Error&) {
      raise(ErrorKind::kInput, kModule, "class '" + name + "' is not in the vocabulary");
    }
  }
  if (seqs.empty()) raise(ErrorKind::kInput, kModule, "empty class list");
  ReferenceEmbeddings ref;
  ref.class_names = classes;
  {
    NoGradGuard no_grad;
    const Tensor raw = text_encode_batch(encoder, seqs);
    ref.embeddings = (normalized ? l2_normalize(raw) : raw).detach();
  }
  ref.checksum = checksum(ref.embeddings.data());
  return ref;
}

Tensor encode_prompt_set(const DualEncoder& encoder, const PromptSet& prompts) {
  if (prompts.class_tokens.empty()) raise(ErrorKind::kInput, kModule, "empty prompt set");
  return l2_normalize(text_encode_soft_batch(encoder, prompts.prefix, prompts.class_tokens));
}

}  // namespace promim
