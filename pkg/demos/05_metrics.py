"""Entity F1 (micro/macro with the deletion rule) and corpus BLEU by example."""

from kbdialog.evaluate import corpus_bleu, entity_f1, extract_entities

lexicon = {"valero", "200_alester_ave", "2_miles", "gas_station"}

gold = "valero is located at 200_alester_ave".split()
good = "valero is at 200_alester_ave".split()
partial = "valero is 2_miles away".split()
chitchat = "you are welcome".split()

print("entities in gold:", extract_entities(gold, lexicon))
print("entities in partial reply:", extract_entities(partial, lexicon))

pairs = [
    (extract_entities(gold, lexicon), extract_entities(good, lexicon)),     # perfect
    (extract_entities(gold, lexicon), extract_entities(partial, lexicon)),  # 1 of 2 + 1 spurious
    (extract_entities(chitchat, lexicon), extract_entities(chitchat, lexicon)),  # deleted in macro
]
micro, macro = entity_f1(pairs)
print(f"micro F1 {micro:.1f} | macro F1 {macro:.1f} "
      "(the entity-free instance is deleted from the macro average)")

candidates = [good, partial, chitchat]
references = [gold, gold, chitchat]
print(f"corpus BLEU-4: {corpus_bleu(candidates, references):.1f}")
print(f"perfect corpus: {corpus_bleu(references, references):.1f}")
