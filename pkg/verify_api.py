import json
import sys
import urllib.error
import urllib.request

BASE_URL = "http://localhost:8000"


def make_request(endpoint, payload=None, output_filename=None):
    url = f"{BASE_URL}{endpoint}"
    print(f"Testing {url}...")
    data = json.dumps(payload).encode() if payload is not None else None
    request = urllib.request.Request(url, data=data, headers={"Content-Type": "application/json"})
    try:
        with urllib.request.urlopen(request) as response:
            body = json.loads(response.read().decode())
            text = json.dumps(body, indent=2)
            print("Success! Response:")
            print(text[:500] + "... (truncated)" if len(text) > 500 else text)
            if output_filename:
                with open(output_filename, "w", encoding="utf-8") as f:
                    json.dump(body, f, indent=2)
                print(f"Saved response to '{output_filename}'")
            return body
    except urllib.error.HTTPError as e:
        print(f"Failed with status code: {e.code}: {e.read().decode()}")
        return None
    except urllib.error.URLError as e:
        print(f"Connection failed: {e}")
        print("   (Make sure the server is running with 'docker-compose up' or 'uvicorn invofactor.main:app')")
        return None


def main():
    print("--- invofactor API verification ---\n")

    # 1. Health
    if make_request("/health") is None:
        sys.exit(1)

    print("\n" + "-" * 40 + "\n")

    # 2. λ = 2 over F5 with three involutions is acceptable
    make_request("/api/v1/acceptable", {"field": "F5", "lambda": 2, "polys": "t^2-1;t^2-1;t^2-1"})

    print("\n" + "-" * 40 + "\n")

    # 3. Factor 2·id over F5 and verify the certificate
    operator = {"field": "F5", "periodic_blocks": [{"id": "P0", "matrix": [[2]]}]}
    cert = make_request(
        "/api/v1/factor",
        {"operator": operator, "polys": "t^2-1;t^2-1;t^2-1"},
        output_filename="api_certificate.json",
    )
    if cert is not None:
        make_request("/api/v1/verify", {"operator": operator, "certificate": cert})

    print("\n" + "-" * 40 + "\n")

    # 4. Census of four involutions in GL_2(F3)
    make_request("/api/v1/census?n=2&q=3&k=4&poly=t%5E2-1")


if __name__ == "__main__":
    main()
