/**
 * Embedded mini corpus of short review-style sentences.
 *
 * The builtin fill-mask and perplexity providers are fitted on these counts,
 * so the server is fully deterministic and needs no downloads.
 */

export const CORPUS: string[] = [
  "a deep and moving film .",
  "a deep and meaningful story .",
  "a deep and meaningful film indeed .",
  "the film is a gem .",
  "the movie is a gem .",
  "a truly bad film .",
  "a truly deep movie .",
  "no heart and no story .",
  "this film is dull .",
  "this movie is bad .",
  "a bad and dull story .",
  "a bad and dull film .",
  "the deep story is moving .",
  "the dull story is bad .",
  "a meaningful film indeed .",
  "a moving film indeed .",
  "the movie is deep .",
  "the film is moving .",
  "a charming and meaningful movie .",
  "a charming and moving story .",
  "the story has heart .",
  "the film has no heart .",
  "a dull and bad movie .",
  "a gem of a film .",
  "a gem of a story .",
  "no film is this dull .",
  "no movie should be this bad .",
  "the story is truly meaningful .",
  "the film is truly deep .",
  "a bad film with no heart .",
  "a moving and deep story .",
  "a meaningful and moving film .",
  "this story is a mess .",
  "a mess of a movie .",
  "the charming film is a gem .",
  "a dull film with no story .",
  "this deep film is moving .",
  "the bad movie is a mess .",
  "a story with heart .",
  "a film with heart .",
];
