"""Spin up the HTTP service around a (quickly trained) model and talk to it.

Shows the full wire protocol: POST /session with a KB, POST /chat per
utterance, GET /session/<id> for the transcript. The same endpoints back the
browser client in frontend/.
"""

import json
import tempfile
import threading
from http.client import HTTPConnection
from pathlib import Path

from kbdialog.corpus import load_kvret
from kbdialog.server import serve
from kbdialog.synthetic import training_config, write_splits
from kbdialog.training import train

out = Path(tempfile.mkdtemp(prefix="kbdialog-serve-"))
paths = write_splits(out, num_dialogues=240, held_out=10, dev=10)
train_d = load_kvret(paths["train"], "navigation", "train")
print("training a small model for the demo (about two minutes)...")
result = train(training_config(rl_pretrain_epochs=12, epochs=10), train_d)

httpd = serve(result.model, port=0, max_len=25)
port = httpd.server_address[1]
threading.Thread(target=httpd.serve_forever, daemon=True).start()
print(f"service listening on 127.0.0.1:{port}")


def call(method, path, payload=None):
    conn = HTTPConnection("127.0.0.1", port, timeout=30)
    conn.request(method, path, body=json.dumps(payload) if payload else None)
    resp = conn.getresponse()
    data = json.loads(resp.read())
    conn.close()
    return resp.status, data


print("health:", call("GET", "/health")[1])

kb = {
    "columns": ["poi", "traffic_info", "poi_type", "address", "distance"],
    "rows": [
        {"poi": "Valero", "poi_type": "gas station", "address": "200 Alester Ave",
         "distance": "2 miles", "traffic_info": "road block nearby"},
        {"poi": "Cafe Venetia", "poi_type": "coffee shop", "address": "269 Alger Dr",
         "distance": "1 miles", "traffic_info": "car collision nearby"},
    ],
}
_, session = call("POST", "/session", {"kb": kb})
sid = session["session_id"]
print("session:", sid)

for utterance in ["where is the nearest gas station ?", "what is the address ?"]:
    _, reply = call("POST", "/chat", {"session_id": sid, "utterance": utterance})
    probs = reply["trace"]["entry_probs"]
    labels = reply["trace"]["entry_labels"]
    best = max(range(len(probs)), key=probs.__getitem__)
    print(f"driver> {utterance}")
    print(f"car>    {reply['response']}   [row: {labels[best]} p={probs[best]:.2f}]")

_, history = call("GET", f"/session/{sid}")
print("\ntranscript:")
for turn in history["turns"]:
    print(f"  {turn['speaker']}: {turn['text']}")
httpd.shutdown()
